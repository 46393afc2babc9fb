//! Comparison studies: strategy det(S) comparisons, best-so-far curves,
//! cross-episode parameter variance, and cross-episode output prediction
//! from an identified parameter vector. Reports serialize to JSON (lossless)
//! and CSV (17 significant digits, fixed column order).

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calib::{identify_full, predict, ParameterVector, Posture};
use crate::doe::{
    det_information, exchange_improve, exhaustive_select, greedy_select, information_matrix,
    log_det_objective, random_select, SubsetSelection,
};
use crate::error::{Error, Result};
use crate::rl::{policy_select_greedy, PolicyParams};
use crate::sim::{stream_rng, Dataset, EpisodeData};

const STREAM_RANDOM_SELECT: u64 = 0x52414e44;

/// A posture-selection strategy under comparison.
pub enum Strategy<'a> {
    Ppo(&'a PolicyParams),
    Exhaustive,
    Greedy,
    Exchange,
    Random,
}

impl Strategy<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            Strategy::Ppo(_) => "ppo",
            Strategy::Exhaustive => "exhaustive",
            Strategy::Greedy => "greedy",
            Strategy::Exchange => "exchange",
            Strategy::Random => "random",
        }
    }
}

/// Options shared by the study operations.
#[derive(Debug, Clone, Copy)]
pub struct StudyOptions {
    pub k: usize,
    pub random_repeats: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            k: 4,
            random_repeats: 100,
            seed: 0,
            threads: 1,
        }
    }
}

/// det(S) and its floored log for one episode under one strategy. For the
/// random strategy these are means over the configured repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeOutcome {
    pub episode_id: u64,
    pub det_s: f64,
    pub log_det: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub log10_lo: f64,
    pub log10_hi: f64,
    pub count: usize,
}

/// Per-strategy comparison results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyReport {
    pub strategy: String,
    pub per_episode: Vec<EpisodeOutcome>,
    pub mean_det: f64,
    pub std_det: f64,
    pub mean_log_det: f64,
    pub std_log_det: f64,
    /// Running maximum of per-episode det(S), in episode order.
    pub best_so_far: Vec<f64>,
    /// Decade bins over the positive per-episode det(S) values.
    pub histogram: Vec<HistogramBin>,
    /// Episodes whose det(S) came out exactly zero (singular selections).
    pub n_singular: usize,
    pub random_repeats: Option<usize>,
}

/// Cross-episode variance of the identified parameters, per strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyVariance {
    pub strategy: String,
    pub variances: Vec<f64>,
    pub n_episodes: usize,
    pub n_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceReport {
    pub entries: Vec<StrategyVariance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub episode_id: u64,
    pub point_index: usize,
    pub axis: String,
    pub y_true: f64,
    pub y_pred: f64,
}

/// Predicted-versus-true traces and per-axis RMSE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub points_per_episode: usize,
    pub per_axis_rmse: [f64; 3],
    pub total_rmse: f64,
    pub traces: Vec<TracePoint>,
}

/// Any report kind, for format-conversion tooling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Report {
    Strategies { reports: Vec<StrategyReport> },
    Variance(VarianceReport),
    Prediction(PredictionReport),
}

fn subset_outcome(candidates: &[Posture], selection: &SubsetSelection) -> Result<(f64, f64)> {
    let postures: Vec<Posture> = selection.indices.iter().map(|&i| candidates[i]).collect();
    let det = det_information(&postures)?;
    let obj = log_det_objective(&information_matrix(&postures)?);
    Ok((det, obj.value))
}

/// Selections an episode gets under one strategy: one entry, except for the
/// random baseline which draws `repeats` independent subsets.
fn select_for_episode(
    strategy: &Strategy,
    ep: &EpisodeData,
    opts: &StudyOptions,
    repeats: usize,
) -> Result<Vec<SubsetSelection>> {
    match strategy {
        Strategy::Ppo(params) => Ok(vec![policy_select_greedy(params, &ep.inputs, opts.k)?]),
        Strategy::Exhaustive => Ok(vec![exhaustive_select(&ep.inputs, opts.k)?]),
        Strategy::Greedy => Ok(vec![greedy_select(&ep.inputs, opts.k)?]),
        Strategy::Exchange => {
            let start = greedy_select(&ep.inputs, opts.k)?;
            Ok(vec![exchange_improve(&ep.inputs, &start)?])
        }
        Strategy::Random => {
            let mut rng = stream_rng(opts.seed, ep.episode_id, STREAM_RANDOM_SELECT);
            (0..repeats)
                .map(|_| random_select(&ep.inputs, opts.k, &mut rng))
                .collect()
        }
    }
}

fn run_per_episode<T, F>(episodes: &[EpisodeData], threads: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&EpisodeData) -> Result<T> + Sync,
{
    if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            episodes.par_iter().map(&f).collect()
        })
    } else {
        episodes.iter().map(|e| f(e)).collect()
    }
}

fn require_outputs(dataset: &Dataset) -> Result<()> {
    if dataset.episodes.iter().any(|e| e.outputs.is_none()) {
        return Err(Error::MissingOutputs);
    }
    Ok(())
}

fn decade_histogram(dets: &[f64]) -> (Vec<HistogramBin>, usize) {
    let positive: Vec<f64> = dets.iter().copied().filter(|&d| d > 0.0).collect();
    let n_singular = dets.len() - positive.len();
    if positive.is_empty() {
        return (Vec::new(), n_singular);
    }
    let lo = positive
        .iter()
        .map(|d| d.log10().floor())
        .fold(f64::INFINITY, f64::min);
    let hi = positive
        .iter()
        .map(|d| d.log10().ceil())
        .fold(f64::NEG_INFINITY, f64::max);
    let n_bins = ((hi - lo) as usize).max(1);
    let mut bins: Vec<HistogramBin> = (0..n_bins)
        .map(|i| HistogramBin {
            log10_lo: lo + i as f64,
            log10_hi: lo + (i + 1) as f64,
            count: 0,
        })
        .collect();
    for d in positive {
        let idx = ((d.log10() - lo).floor() as usize).min(n_bins - 1);
        bins[idx].count += 1;
    }
    (bins, n_singular)
}

/// Runs every strategy over every episode of an output-bearing dataset.
///
/// The random baseline is averaged over `opts.random_repeats` draws per
/// episode; its summary statistics are computed over the per-episode means,
/// like every other strategy.
pub fn compare_strategies(
    dataset: &Dataset,
    strategies: &[Strategy],
    opts: &StudyOptions,
) -> Result<Vec<StrategyReport>> {
    require_outputs(dataset)?;
    if strategies.is_empty() {
        return Err(Error::EmptyInput { what: "strategies" });
    }
    let mut reports = Vec::with_capacity(strategies.len());
    for strategy in strategies {
        let repeats = match strategy {
            Strategy::Random => opts.random_repeats.max(1),
            _ => 1,
        };
        let outcomes: Vec<EpisodeOutcome> =
            run_per_episode(&dataset.episodes, opts.threads, |ep| {
                let selections = select_for_episode(strategy, ep, opts, repeats)?;
                let mut det_acc = 0.0;
                let mut log_acc = 0.0;
                for sel in &selections {
                    let (det, log_det) = subset_outcome(&ep.inputs, sel)?;
                    det_acc += det;
                    log_acc += log_det;
                }
                Ok(EpisodeOutcome {
                    episode_id: ep.episode_id,
                    det_s: det_acc / selections.len() as f64,
                    log_det: log_acc / selections.len() as f64,
                })
            })?;
        let dets: Vec<f64> = outcomes.iter().map(|o| o.det_s).collect();
        let logs: Vec<f64> = outcomes.iter().map(|o| o.log_det).collect();
        let (mean_det, std_det) = crate::rl::train::mean_std(&dets);
        let (mean_log_det, std_log_det) = crate::rl::train::mean_std(&logs);
        let mut best_so_far = Vec::with_capacity(dets.len());
        let mut best = f64::NEG_INFINITY;
        for &d in &dets {
            best = best.max(d);
            best_so_far.push(best);
        }
        let (histogram, n_singular) = decade_histogram(&dets);
        reports.push(StrategyReport {
            strategy: strategy.name().to_string(),
            per_episode: outcomes,
            mean_det,
            std_det,
            mean_log_det,
            std_log_det,
            best_so_far,
            histogram,
            n_singular,
            random_repeats: match strategy {
                Strategy::Random => Some(repeats),
                _ => None,
            },
        });
    }
    Ok(reports)
}

/// Identifies X per episode from each strategy's 4-posture selection and
/// reports the cross-episode variance of every parameter. Rank-deficient
/// selections are excluded and counted as failures.
pub fn parameter_variance_study(
    dataset: &Dataset,
    strategies: &[Strategy],
    opts: &StudyOptions,
) -> Result<VarianceReport> {
    require_outputs(dataset)?;
    let mut entries = Vec::with_capacity(strategies.len());
    for strategy in strategies {
        let results: Vec<Option<ParameterVector>> =
            run_per_episode(&dataset.episodes, opts.threads, |ep| {
                let sel = select_for_episode(strategy, ep, opts, 1)?.remove(0);
                let outputs = ep.outputs.as_ref().expect("outputs checked");
                let postures: Vec<_> = sel.indices.iter().map(|&i| ep.inputs[i]).collect();
                let measured: Vec<_> = sel.indices.iter().map(|&i| outputs[i]).collect();
                match identify_full(&postures, &measured) {
                    Ok((x, _)) => Ok(Some(x)),
                    Err(Error::RankDeficient { .. }) | Err(Error::IllConditioned { .. }) => {
                        Ok(None)
                    }
                    Err(e) => Err(e),
                }
            })?;
        let ok: Vec<&ParameterVector> = results.iter().flatten().collect();
        let n_failures = results.len() - ok.len();
        let mut variances = vec![0.0; 12];
        if ok.len() >= 2 {
            for p in 0..12 {
                let vals: Vec<f64> = ok.iter().map(|x| x.0[p]).collect();
                let (_, std) = crate::rl::train::mean_std(&vals);
                variances[p] = std * std;
            }
        }
        entries.push(StrategyVariance {
            strategy: strategy.name().to_string(),
            variances,
            n_episodes: ok.len(),
            n_failures,
        });
    }
    Ok(VarianceReport { entries })
}

/// Predicts the first `points_per_episode` outputs of every episode from
/// `x_source` and reports traces plus per-axis RMSE.
pub fn cross_episode_prediction(
    x_source: &ParameterVector,
    episodes: &[EpisodeData],
    points_per_episode: usize,
) -> Result<PredictionReport> {
    if episodes.is_empty() {
        return Err(Error::EmptyInput { what: "episodes" });
    }
    const AXES: [&str; 3] = ["pitch", "yaw", "roll"];
    let mut traces = Vec::new();
    let mut sq = [0.0; 3];
    let mut n = 0usize;
    for ep in episodes {
        let outputs = ep.outputs.as_ref().ok_or(Error::MissingOutputs)?;
        if ep.inputs.len() < points_per_episode {
            return Err(Error::InvalidArgument(format!(
                "episode {} has {} postures, need {points_per_episode}",
                ep.episode_id,
                ep.inputs.len()
            )));
        }
        for i in 0..points_per_episode {
            let pred = predict(x_source, &ep.inputs[i]);
            let truth = outputs[i];
            let pred_v: [f64; 3] = pred.into();
            let true_v: [f64; 3] = truth.into();
            for a in 0..3 {
                sq[a] += (pred_v[a] - true_v[a]).powi(2);
                traces.push(TracePoint {
                    episode_id: ep.episode_id,
                    point_index: i,
                    axis: AXES[a].to_string(),
                    y_true: true_v[a],
                    y_pred: pred_v[a],
                });
            }
            n += 1;
        }
    }
    let per_axis_rmse = [
        (sq[0] / n as f64).sqrt(),
        (sq[1] / n as f64).sqrt(),
        (sq[2] / n as f64).sqrt(),
    ];
    let total_rmse = ((sq[0] + sq[1] + sq[2]) / (3.0 * n as f64)).sqrt();
    Ok(PredictionReport {
        points_per_episode,
        per_axis_rmse,
        total_rmse,
        traces,
    })
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

/// Serializes any report to JSON (lossless round trip).
pub fn write_report_json(report: &Report, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer(&mut w, report).map_err(|e| Error::Format(format!("report: {e}")))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_report_json(path: &Path) -> Result<Report> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Format(format!("report: {e}")))
}

/// Strategy-comparison CSV: one row per episode per strategy.
pub fn write_strategy_csv(reports: &[StrategyReport], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "episode_id,strategy,det_S,logdet").map_err(|e| Error::io(path, e))?;
    for report in reports {
        for o in &report.per_episode {
            writeln!(
                w,
                "{},{},{},{}",
                o.episode_id,
                report.strategy,
                fmt17(o.det_s),
                fmt17(o.log_det)
            )
            .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Variance-study CSV: one row per parameter per strategy.
pub fn write_variance_csv(report: &VarianceReport, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "parameter_index,strategy,variance,n_episodes,n_failures")
        .map_err(|e| Error::io(path, e))?;
    for entry in &report.entries {
        for (p, v) in entry.variances.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{}",
                p,
                entry.strategy,
                fmt17(*v),
                entry.n_episodes,
                entry.n_failures
            )
            .map_err(|e| Error::io(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Prediction traces CSV plus a side file with the RMSE summary.
pub fn write_prediction_csv(report: &PredictionReport, path: &Path, rmse_path: &Path) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "episode_id,point_index,axis,y_true,y_pred").map_err(|e| Error::io(path, e))?;
    for t in &report.traces {
        writeln!(
            w,
            "{},{},{},{},{}",
            t.episode_id,
            t.point_index,
            t.axis,
            fmt17(t.y_true),
            fmt17(t.y_pred)
        )
        .map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let mut w = create(rmse_path)?;
    writeln!(w, "axis,rmse").map_err(|e| Error::io(rmse_path, e))?;
    for (axis, rmse) in ["pitch", "yaw", "roll"].iter().zip(report.per_axis_rmse) {
        writeln!(w, "{axis},{}", fmt17(rmse)).map_err(|e| Error::io(rmse_path, e))?;
    }
    writeln!(w, "total,{}", fmt17(report.total_rmse)).map_err(|e| Error::io(rmse_path, e))?;
    w.flush().map_err(|e| Error::io(rmse_path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{build_dataset, AxisBounds, DatasetSpec, PlantTruth};

    fn noisy_dataset(n: u64, seed: u64) -> Dataset {
        let spec = DatasetSpec::new(n, 50, AxisBounds::normalized(), seed, true).unwrap();
        let plant = PlantTruth::reference();
        build_dataset(&spec, Some(&plant)).unwrap()
    }

    fn noiseless_dataset(n: u64, seed: u64) -> Dataset {
        let spec = DatasetSpec::new(n, 50, AxisBounds::normalized(), seed, true).unwrap();
        let plant = PlantTruth::reference().with_noise([0.0; 3]);
        build_dataset(&spec, Some(&plant)).unwrap()
    }

    #[test]
    fn exhaustive_upper_bounds_every_strategy() {
        let ds = noisy_dataset(6, 51);
        let opts = StudyOptions {
            random_repeats: 5,
            ..Default::default()
        };
        let reports = compare_strategies(
            &ds,
            &[
                Strategy::Exhaustive,
                Strategy::Greedy,
                Strategy::Exchange,
                Strategy::Random,
            ],
            &opts,
        )
        .unwrap();
        let ex = &reports[0];
        for other in &reports[1..] {
            for (a, b) in ex.per_episode.iter().zip(&other.per_episode) {
                assert!(
                    a.det_s >= b.det_s - 1e-9 * a.det_s.abs(),
                    "{} exceeded exhaustive on episode {}",
                    other.strategy,
                    a.episode_id
                );
            }
        }
    }

    #[test]
    fn single_episode_dataset_gives_one_entry_per_strategy() {
        let ds = noisy_dataset(1, 52);
        let reports = compare_strategies(
            &ds,
            &[Strategy::Greedy, Strategy::Random],
            &StudyOptions {
                random_repeats: 3,
                ..Default::default()
            },
        )
        .unwrap();
        for r in &reports {
            assert_eq!(r.per_episode.len(), 1);
            assert_eq!(r.best_so_far.len(), 1);
        }
        assert_eq!(reports[1].random_repeats, Some(3));
    }

    #[test]
    fn best_so_far_is_monotone() {
        let ds = noisy_dataset(12, 53);
        let reports =
            compare_strategies(&ds, &[Strategy::Random], &StudyOptions::default()).unwrap();
        let b = &reports[0].best_so_far;
        for w in b.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn compare_requires_outputs() {
        let spec = DatasetSpec::new(2, 50, AxisBounds::normalized(), 54, false).unwrap();
        let ds = build_dataset(&spec, None).unwrap();
        assert!(matches!(
            compare_strategies(&ds, &[Strategy::Greedy], &StudyOptions::default()),
            Err(Error::MissingOutputs)
        ));
    }

    #[test]
    fn threaded_comparison_matches_sequential() {
        let ds = noisy_dataset(8, 55);
        let opts1 = StudyOptions {
            random_repeats: 4,
            ..Default::default()
        };
        let opts4 = StudyOptions {
            threads: 4,
            ..opts1
        };
        let seq = compare_strategies(&ds, &[Strategy::Greedy, Strategy::Random], &opts1).unwrap();
        let par = compare_strategies(&ds, &[Strategy::Greedy, Strategy::Random], &opts4).unwrap();
        assert_eq!(seq, par);
    }

    #[test]
    fn noiseless_exhaustive_identification_has_zero_variance() {
        let ds = noiseless_dataset(6, 56);
        let report =
            parameter_variance_study(&ds, &[Strategy::Exhaustive], &StudyOptions::default())
                .unwrap();
        let entry = &report.entries[0];
        assert_eq!(entry.n_failures, 0);
        assert_eq!(entry.n_episodes, 6);
        for &v in &entry.variances {
            assert!(v < 1e-16, "variance {v}");
        }
    }

    #[test]
    fn prediction_with_true_parameters_is_exact_on_noiseless_data() {
        let ds = noiseless_dataset(3, 57);
        let truth = PlantTruth::reference().parameters();
        let report = cross_episode_prediction(&truth, &ds.episodes, 8).unwrap();
        for rmse in report.per_axis_rmse {
            assert!(rmse < 1e-12);
        }
        assert_eq!(report.traces.len(), 3 * 8 * 3);
    }

    #[test]
    fn bias_perturbation_moves_only_that_axis() {
        let ds = noiseless_dataset(4, 58);
        let truth = PlantTruth::reference().parameters();
        let mut bumped = truth;
        let delta = 0.37;
        bumped.0[10] += delta; // yaw bias
        let report = cross_episode_prediction(&bumped, &ds.episodes, 8).unwrap();
        assert!((report.per_axis_rmse[1] - delta).abs() < 1e-9);
        assert!(report.per_axis_rmse[0] < 1e-12);
        assert!(report.per_axis_rmse[2] < 1e-12);
    }

    #[test]
    fn short_episode_is_rejected() {
        let spec = DatasetSpec::new(1, 5, AxisBounds::normalized(), 59, true).unwrap();
        let ds = build_dataset(&spec, Some(&PlantTruth::reference())).unwrap();
        let truth = PlantTruth::reference().parameters();
        assert!(cross_episode_prediction(&truth, &ds.episodes, 8).is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let ds = noisy_dataset(3, 60);
        let reports = compare_strategies(
            &ds,
            &[Strategy::Greedy, Strategy::Random],
            &StudyOptions {
                random_repeats: 2,
                ..Default::default()
            },
        )
        .unwrap();
        let report = Report::Strategies { reports };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        write_report_json(&report, &path).unwrap();
        let back = read_report_json(&path).unwrap();
        assert_eq!(report, back);
    }

    #[test]
    fn csv_schemas_match_contract() {
        let ds = noisy_dataset(2, 61);
        let dir = tempfile::tempdir().unwrap();
        let reports =
            compare_strategies(&ds, &[Strategy::Greedy], &StudyOptions::default()).unwrap();
        let p = dir.path().join("strategies.csv");
        write_strategy_csv(&reports, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "episode_id,strategy,det_S,logdet");
        assert_eq!(text.lines().count(), 1 + 2);

        let var = parameter_variance_study(&ds, &[Strategy::Greedy], &StudyOptions::default())
            .unwrap();
        let p = dir.path().join("variance.csv");
        write_variance_csv(&var, &p).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "parameter_index,strategy,variance,n_episodes,n_failures"
        );
        assert_eq!(text.lines().count(), 1 + 12);

        let truth = PlantTruth::reference().parameters();
        let pred = cross_episode_prediction(&truth, &ds.episodes, 8).unwrap();
        let p1 = dir.path().join("predict.csv");
        let p2 = dir.path().join("predict_rmse.csv");
        write_prediction_csv(&pred, &p1, &p2).unwrap();
        let text = std::fs::read_to_string(&p1).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "episode_id,point_index,axis,y_true,y_pred"
        );
        let text = std::fs::read_to_string(&p2).unwrap();
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn random_baseline_standard_error_shrinks_with_repeats() {
        // Repeated single-episode studies across seeds: the spread of the
        // reported random-baseline mean should shrink roughly like
        // 1/sqrt(R). Measured on the log-det mean, whose draw distribution
        // is far less tail-heavy than raw det(S).
        let ds = noisy_dataset(1, 62);
        let spread = |repeats: usize| -> f64 {
            let means: Vec<f64> = (0..48)
                .map(|seed| {
                    let opts = StudyOptions {
                        random_repeats: repeats,
                        seed,
                        ..Default::default()
                    };
                    compare_strategies(&ds, &[Strategy::Random], &opts).unwrap()[0].mean_log_det
                })
                .collect();
            crate::rl::train::mean_std(&means).1
        };
        let s10 = spread(10);
        let s100 = spread(100);
        let s1000 = spread(1000);
        // sqrt(10) ~ 3.16 per decade; allow a loose band.
        assert!(s10 / s100 > 2.0, "s10 {s10}, s100 {s100}");
        assert!(s100 / s1000 > 2.0, "s100 {s100}, s1000 {s1000}");
    }
}
