//! Command implementations.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use docal::calib::{identify_full, ParameterVector};
use docal::doe::{
    det_information, exchange_improve, exhaustive_select, greedy_select, information_matrix,
    log_det_objective, random_select, SubsetSelection,
};
use docal::eval::{
    compare_strategies, cross_episode_prediction, parameter_variance_study, read_report_json,
    write_prediction_csv, write_report_json, write_strategy_csv, write_variance_csv, Report,
    Strategy, StudyOptions,
};
use docal::rl::{
    load_checkpoint, policy_select_greedy, save_checkpoint, train, CheckpointMeta, PolicyParams,
    UniformSource,
};
use docal::sim::{export_csv, load_dataset, make_dataset, stream_rng};
use docal::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const SELECTIONS_FORMAT_VERSION: u32 = 1;

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn ensure_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// `gen`: write a dataset and report its shape and digest.
pub fn cmd_gen(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    ensure_out(out_dir)?;
    cfg.echo(out_dir)?;
    let path = out_dir.join("dataset.jsonl");
    let plant = cfg.dataset.with_outputs.then_some(&cfg.plant);
    let dataset = make_dataset(&cfg.dataset, plant, &path, cfg.threads)?;
    let csv_path = out_dir.join("dataset.csv");
    export_csv(&dataset, &csv_path)?;
    println!(
        "wrote {} episodes x {} postures ({}) to {}",
        dataset.episodes.len(),
        cfg.dataset.m_per_episode,
        if cfg.dataset.with_outputs { "inputs+outputs" } else { "inputs only" },
        path.display()
    );
    println!("digest sha256:{}", file_digest(&path)?);
    Ok(())
}

/// `train`: run the PPO budget, write checkpoint and learning curve.
pub fn cmd_train(cfg: &RunConfig, out_dir: &Path) -> Result<()> {
    ensure_out(out_dir)?;
    cfg.echo(out_dir)?;
    let source = UniformSource::from_config(&cfg.train);
    let outcome = train(&cfg.train, &source)?;
    let ckpt_path = out_dir.join("checkpoint.json");
    let meta = CheckpointMeta {
        config_digest: cfg.train.digest(),
        hidden_dim: cfg.train.hidden_dim,
        trained_episodes: cfg.train.total_episodes,
        seed: cfg.train.seed,
    };
    save_checkpoint(&outcome.params, &meta, &ckpt_path)?;
    let curve_path = out_dir.join("learning_curve.csv");
    outcome.log.write_curve_csv(&curve_path)?;
    let rewards = outcome.log.rewards();
    let tail = &rewards[rewards.len().saturating_sub(1000)..];
    let mean_tail = tail.iter().sum::<f64>() / tail.len() as f64;
    println!(
        "trained {} episodes (hidden {}), final-1000 mean reward {:.4}",
        cfg.train.total_episodes, cfg.train.hidden_dim, mean_tail
    );
    println!("checkpoint {}", ckpt_path.display());
    println!("curve {}", curve_path.display());
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StrategyArg {
    Ppo,
    Exhaustive,
    Greedy,
    Exchange,
    Random,
}

impl StrategyArg {
    pub fn name(self) -> &'static str {
        match self {
            StrategyArg::Ppo => "ppo",
            StrategyArg::Exhaustive => "exhaustive",
            StrategyArg::Greedy => "greedy",
            StrategyArg::Exchange => "exchange",
            StrategyArg::Random => "random",
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SelectionsHeader {
    format_version: u32,
    strategy: String,
    k: usize,
    repeats: usize,
    dataset_digest: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SelectionRecord {
    episode_id: u64,
    indices: Vec<usize>,
    det_s: f64,
    logdet: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct SelectionsSummary {
    summary: SummaryBody,
}

#[derive(Debug, Serialize, Deserialize)]
struct SummaryBody {
    n_episodes: usize,
    mean_det: f64,
    std_det: f64,
    mean_logdet: f64,
    std_logdet: f64,
}

fn subset_det_logdet(dataset_ep: &docal::sim::EpisodeData, sel: &SubsetSelection) -> Result<(f64, f64)> {
    let postures: Vec<_> = sel.indices.iter().map(|&i| dataset_ep.inputs[i]).collect();
    let det = det_information(&postures)?;
    let obj = log_det_objective(&information_matrix(&postures)?);
    Ok((det, obj.value))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `select`: run one strategy over every episode, write selections.
pub fn cmd_select(
    cfg: &RunConfig,
    out_dir: &Path,
    dataset_path: &Path,
    strategy: StrategyArg,
    checkpoint: Option<&Path>,
    repeats: usize,
) -> Result<()> {
    ensure_out(out_dir)?;
    cfg.echo(out_dir)?;
    let dataset = load_dataset(dataset_path)?;
    let k = cfg.select_k;

    let params: Option<PolicyParams> = match strategy {
        StrategyArg::Ppo => {
            let path = checkpoint.ok_or_else(|| {
                Error::InvalidArgument("strategy 'ppo' requires --checkpoint".into())
            })?;
            Some(load_checkpoint(path)?.0)
        }
        _ => None,
    };

    let path = out_dir.join("selections.jsonl");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    let header = SelectionsHeader {
        format_version: SELECTIONS_FORMAT_VERSION,
        strategy: strategy.name().to_string(),
        k,
        repeats: if strategy == StrategyArg::Random { repeats } else { 1 },
        dataset_digest: file_digest(dataset_path)?,
    };
    writeln!(
        w,
        "{}",
        serde_json::to_string(&header).map_err(|e| Error::Format(e.to_string()))?
    )
    .map_err(|e| Error::io(&path, e))?;

    let mut dets = Vec::new();
    let mut logs = Vec::new();
    for ep in &dataset.episodes {
        let record = match strategy {
            StrategyArg::Ppo => {
                let sel = policy_select_greedy(params.as_ref().expect("loaded"), &ep.inputs, k)?;
                let (det, logdet) = subset_det_logdet(ep, &sel)?;
                SelectionRecord {
                    episode_id: ep.episode_id,
                    indices: sel.indices,
                    det_s: det,
                    logdet,
                }
            }
            StrategyArg::Exhaustive => {
                let sel = exhaustive_select(&ep.inputs, k)?;
                let (det, logdet) = subset_det_logdet(ep, &sel)?;
                SelectionRecord {
                    episode_id: ep.episode_id,
                    indices: sel.indices,
                    det_s: det,
                    logdet,
                }
            }
            StrategyArg::Greedy => {
                let sel = greedy_select(&ep.inputs, k)?;
                let (det, logdet) = subset_det_logdet(ep, &sel)?;
                SelectionRecord {
                    episode_id: ep.episode_id,
                    indices: sel.indices,
                    det_s: det,
                    logdet,
                }
            }
            StrategyArg::Exchange => {
                let start = greedy_select(&ep.inputs, k)?;
                let sel = exchange_improve(&ep.inputs, &start)?;
                let (det, logdet) = subset_det_logdet(ep, &sel)?;
                SelectionRecord {
                    episode_id: ep.episode_id,
                    indices: sel.indices,
                    det_s: det,
                    logdet,
                }
            }
            StrategyArg::Random => {
                // Representative indices come from the first draw; det and
                // logdet are averaged over the requested repeats.
                let mut rng = stream_rng(cfg.dataset.seed, ep.episode_id, 0x52414e44);
                let reps = repeats.max(1);
                let mut first: Option<Vec<usize>> = None;
                let mut det_acc = 0.0;
                let mut log_acc = 0.0;
                for _ in 0..reps {
                    let sel = random_select(&ep.inputs, k, &mut rng)?;
                    let (det, logdet) = subset_det_logdet(ep, &sel)?;
                    det_acc += det;
                    log_acc += logdet;
                    if first.is_none() {
                        first = Some(sel.indices);
                    }
                }
                SelectionRecord {
                    episode_id: ep.episode_id,
                    indices: first.expect("reps >= 1"),
                    det_s: det_acc / reps as f64,
                    logdet: log_acc / reps as f64,
                }
            }
        };
        dets.push(record.det_s);
        logs.push(record.logdet);
        writeln!(
            w,
            "{}",
            serde_json::to_string(&record).map_err(|e| Error::Format(e.to_string()))?
        )
        .map_err(|e| Error::io(&path, e))?;
    }
    let (mean_det, std_det) = mean_std(&dets);
    let (mean_logdet, std_logdet) = mean_std(&logs);
    let summary = SelectionsSummary {
        summary: SummaryBody {
            n_episodes: dets.len(),
            mean_det,
            std_det,
            mean_logdet,
            std_logdet,
        },
    };
    writeln!(
        w,
        "{}",
        serde_json::to_string(&summary).map_err(|e| Error::Format(e.to_string()))?
    )
    .map_err(|e| Error::io(&path, e))?;
    w.flush().map_err(|e| Error::io(&path, e))?;
    println!(
        "{}: {} episodes, mean det(S) {:.6e}, mean logdet {:.4}",
        strategy.name(),
        dets.len(),
        mean_det,
        mean_logdet
    );
    println!("selections {}", path.display());
    Ok(())
}

/// Reads the episode records of a selections file (header and summary are
/// skipped).
pub fn read_selections(path: &Path) -> Result<Vec<(u64, Vec<usize>)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if lineno == 0 || line.contains("\"summary\"") {
            continue;
        }
        let rec: SelectionRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("selections line {}: {e}", lineno + 1)))?;
        out.push((rec.episode_id, rec.indices));
    }
    Ok(out)
}

/// `identify`: least-squares identification from each episode's selection.
pub fn cmd_identify(
    cfg: &RunConfig,
    out_dir: &Path,
    dataset_path: &Path,
    selections_path: &Path,
) -> Result<()> {
    ensure_out(out_dir)?;
    cfg.echo(out_dir)?;
    let dataset = load_dataset(dataset_path)?;
    let selections = read_selections(selections_path)?;
    let path = out_dir.join("parameters.csv");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    writeln!(
        w,
        "episode_id,status,a11,a12,a13,a21,a22,a23,a31,a32,a33,b_x,b_y,b_z,condition"
    )
    .map_err(|e| Error::io(&path, e))?;

    let mut ok = 0usize;
    let mut failed = 0usize;
    for (episode_id, indices) in &selections {
        let ep = dataset
            .episodes
            .iter()
            .find(|e| e.episode_id == *episode_id)
            .ok_or_else(|| {
                Error::Format(format!("episode {episode_id} not present in dataset"))
            })?;
        let outputs = ep.outputs.as_ref().ok_or(Error::MissingOutputs)?;
        let postures: Vec<_> = indices.iter().map(|&i| ep.inputs[i]).collect();
        let measured: Vec<_> = indices.iter().map(|&i| outputs[i]).collect();
        match identify_full(&postures, &measured) {
            Ok((x, diag)) => {
                ok += 1;
                let cols: Vec<String> = x.0.iter().map(|v| format!("{v:.16e}")).collect();
                writeln!(
                    w,
                    "{},ok,{},{:.16e}",
                    episode_id,
                    cols.join(","),
                    diag.condition
                )
                .map_err(|e| Error::io(&path, e))?;
            }
            Err(Error::RankDeficient { .. }) | Err(Error::IllConditioned { .. }) => {
                failed += 1;
                writeln!(w, "{episode_id},rank_deficient,,,,,,,,,,,,,")
                    .map_err(|e| Error::io(&path, e))?;
            }
            Err(e) => return Err(e),
        }
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    println!("identified {ok} episodes, {failed} failures");
    println!("parameters {}", path.display());
    if ok == 0 {
        return Err(Error::RankDeficient { rank: 0, needed: 12 });
    }
    Ok(())
}

fn build_strategies<'a>(
    strategies: &[StrategyArg],
    params: &'a Option<PolicyParams>,
) -> Result<Vec<Strategy<'a>>> {
    strategies
        .iter()
        .map(|s| {
            Ok(match s {
                StrategyArg::Ppo => Strategy::Ppo(params.as_ref().ok_or_else(|| {
                    Error::InvalidArgument("strategy 'ppo' requires --checkpoint".into())
                })?),
                StrategyArg::Exhaustive => Strategy::Exhaustive,
                StrategyArg::Greedy => Strategy::Greedy,
                StrategyArg::Exchange => Strategy::Exchange,
                StrategyArg::Random => Strategy::Random,
            })
        })
        .collect()
}

/// `eval compare`: strategy det(S) comparison report.
pub fn cmd_eval_compare(
    cfg: &RunConfig,
    out_dir: &Path,
    dataset_path: &Path,
    strategies: &[StrategyArg],
    checkpoint: Option<&Path>,
) -> Result<()> {
    ensure_out(out_dir)?;
    cfg.echo(out_dir)?;
    let dataset = load_dataset(dataset_path)?;
    let params = checkpoint.map(load_checkpoint).transpose()?.map(|p| p.0);
    let strats = build_strategies(strategies, &params)?;
    let opts = StudyOptions {
        k: cfg.select_k,
        random_repeats: cfg.random_repeats,
        seed: cfg.dataset.seed,
        threads: cfg.threads,
    };
    let reports = compare_strategies(&dataset, &strats, &opts)?;
    for r in &reports {
        println!(
            "{}: mean det(S) {:.6e}, std {:.6e}, mean logdet {:.4}",
            r.strategy, r.mean_det, r.std_det, r.mean_log_det
        );
    }
    let json_path = out_dir.join("compare.json");
    write_report_json(&Report::Strategies { reports: reports.clone() }, &json_path)?;
    let csv_path = out_dir.join("compare.csv");
    write_strategy_csv(&reports, &csv_path)?;
    println!("reports {} {}", json_path.display(), csv_path.display());
    Ok(())
}

/// `eval variance`: cross-episode parameter variance report.
pub fn cmd_eval_variance(
    cfg: &RunConfig,
    out_dir: &Path,
    dataset_path: &Path,
    strategies: &[StrategyArg],
    checkpoint: Option<&Path>,
) -> Result<()> {
    ensure_out(out_dir)?;
    cfg.echo(out_dir)?;
    let dataset = load_dataset(dataset_path)?;
    let params = checkpoint.map(load_checkpoint).transpose()?.map(|p| p.0);
    let strats = build_strategies(strategies, &params)?;
    let opts = StudyOptions {
        k: cfg.select_k,
        random_repeats: cfg.random_repeats,
        seed: cfg.dataset.seed,
        threads: cfg.threads,
    };
    let report = parameter_variance_study(&dataset, &strats, &opts)?;
    for e in &report.entries {
        println!(
            "{}: {} episodes identified, {} failures",
            e.strategy, e.n_episodes, e.n_failures
        );
    }
    let json_path = out_dir.join("variance.json");
    write_report_json(&Report::Variance(report.clone()), &json_path)?;
    let csv_path = out_dir.join("variance.csv");
    write_variance_csv(&report, &csv_path)?;
    println!("reports {} {}", json_path.display(), csv_path.display());
    Ok(())
}

/// Parameter-vector source for `eval predict`.
pub enum ParamsSource {
    JsonFile(PathBuf),
    IdentifyCsv { path: PathBuf, episode_id: u64 },
}

pub fn load_params_source(src: &ParamsSource) -> Result<ParameterVector> {
    match src {
        ParamsSource::JsonFile(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let values: Vec<f64> = serde_json::from_str(&text)
                .map_err(|e| Error::Format(format!("params {}: {e}", path.display())))?;
            if values.len() != 12 {
                return Err(Error::Format(format!(
                    "expected 12 parameters, got {}",
                    values.len()
                )));
            }
            let mut arr = [0.0; 12];
            arr.copy_from_slice(&values);
            Ok(ParameterVector(arr))
        }
        ParamsSource::IdentifyCsv { path, episode_id } => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            for line in text.lines().skip(1) {
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() < 15 {
                    continue;
                }
                if fields[0] == episode_id.to_string() {
                    if fields[1] != "ok" {
                        return Err(Error::RankDeficient { rank: 0, needed: 12 });
                    }
                    let mut arr = [0.0; 12];
                    for (i, f) in fields[2..14].iter().enumerate() {
                        arr[i] = f.parse::<f64>().map_err(|e| {
                            Error::Format(format!("bad parameter value '{f}': {e}"))
                        })?;
                    }
                    return Ok(ParameterVector(arr));
                }
            }
            Err(Error::Format(format!(
                "episode {episode_id} not found in {}",
                path.display()
            )))
        }
    }
}

/// `eval predict`: cross-episode prediction traces from a parameter vector.
pub fn cmd_eval_predict(
    cfg: &RunConfig,
    out_dir: &Path,
    dataset_path: &Path,
    source: &ParamsSource,
    points: usize,
) -> Result<()> {
    ensure_out(out_dir)?;
    cfg.echo(out_dir)?;
    let dataset = load_dataset(dataset_path)?;
    let x = load_params_source(source)?;
    let report = cross_episode_prediction(&x, &dataset.episodes, points)?;
    println!(
        "rmse pitch {:.6e} yaw {:.6e} roll {:.6e} total {:.6e}",
        report.per_axis_rmse[0], report.per_axis_rmse[1], report.per_axis_rmse[2], report.total_rmse
    );
    let json_path = out_dir.join("predict.json");
    write_report_json(&Report::Prediction(report.clone()), &json_path)?;
    let csv_path = out_dir.join("predict.csv");
    let rmse_path = out_dir.join("predict_rmse.csv");
    write_prediction_csv(&report, &csv_path, &rmse_path)?;
    println!(
        "reports {} {} {}",
        json_path.display(),
        csv_path.display(),
        rmse_path.display()
    );
    Ok(())
}

/// `report`: convert a JSON report into its CSV form.
pub fn cmd_report(out_dir: &Path, input: &Path) -> Result<()> {
    ensure_out(out_dir)?;
    let report = read_report_json(input)?;
    match &report {
        Report::Strategies { reports } => {
            let path = out_dir.join("compare.csv");
            write_strategy_csv(reports, &path)?;
            println!("wrote {}", path.display());
        }
        Report::Variance(v) => {
            let path = out_dir.join("variance.csv");
            write_variance_csv(v, &path)?;
            println!("wrote {}", path.display());
        }
        Report::Prediction(p) => {
            let path = out_dir.join("predict.csv");
            let rmse = out_dir.join("predict_rmse.csv");
            write_prediction_csv(p, &path, &rmse)?;
            println!("wrote {} and {}", path.display(), rmse.display());
        }
    }
    Ok(())
}

