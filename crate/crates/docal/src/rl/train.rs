//! Training loop, configuration presets, and policy evaluation.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::env::{SelectionEnv, StatsSource, DEFAULT_K, DEFAULT_M, DEFAULT_REWARD_SCALE};
use super::policy::{policy_forward, Adam, PolicyParams};
use super::ppo::{ppo_update, PpoHyper, RolloutBuffer, RolloutEpisode, RolloutStep};
use crate::calib::Posture;
use crate::doe::{det_information, information_matrix, log_det_objective, subset_objective, SubsetSelection};
use crate::error::{Error, Result};
use crate::sim::{sample_uniform_postures, stream_rng, AxisBounds, EpisodeData};

const STREAM_ACTION: u64 = 0x414354;
const STREAM_EVAL: u64 = 0x4556;

/// Everything that shapes a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub total_episodes: u64,
    pub update_every_episodes: u64,
    pub epochs_per_update: usize,
    pub clip_ratio: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub learning_rate: f64,
    pub discount: f64,
    pub seed: u64,
    pub hidden_dim: usize,
    pub reward_scale: f64,
    pub m_candidates: usize,
    pub k_select: usize,
    pub stats_source: StatsSource,
    pub bounds: AxisBounds,
}

impl TrainConfig {
    /// Full-budget preset: 200k episodes, hidden width 768.
    pub fn paper(seed: u64) -> Self {
        Self {
            total_episodes: 200_000,
            hidden_dim: 768,
            ..Self::desk(seed)
        }
    }

    /// Reduced preset sized for commodity hardware: 20k episodes, width 128.
    pub fn desk(seed: u64) -> Self {
        Self {
            total_episodes: 20_000,
            update_every_episodes: 16,
            epochs_per_update: 10,
            clip_ratio: 0.2,
            entropy_coef: 0.01,
            value_coef: 0.5,
            learning_rate: 3e-4,
            discount: 1.0,
            seed,
            hidden_dim: 128,
            reward_scale: DEFAULT_REWARD_SCALE,
            m_candidates: DEFAULT_M,
            k_select: DEFAULT_K,
            stats_source: StatsSource::Inputs,
            bounds: AxisBounds::normalized(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.update_every_episodes == 0 {
            return Err(Error::InvalidArgument(
                "update_every_episodes must be positive".into(),
            ));
        }
        if self.total_episodes == 0 || self.total_episodes % self.update_every_episodes != 0 {
            return Err(Error::InvalidArgument(format!(
                "total_episodes ({}) must be a positive multiple of update_every_episodes ({})",
                self.total_episodes, self.update_every_episodes
            )));
        }
        if self.epochs_per_update == 0 {
            return Err(Error::InvalidArgument(
                "epochs_per_update must be positive".into(),
            ));
        }
        if self.k_select < 4 || self.k_select >= self.m_candidates {
            return Err(Error::InvalidArgument(format!(
                "requires 4 <= K < M, got K={} M={}",
                self.k_select, self.m_candidates
            )));
        }
        self.bounds.validate()
    }

    pub fn hyper(&self) -> PpoHyper {
        PpoHyper {
            clip_ratio: self.clip_ratio,
            entropy_coef: self.entropy_coef,
            value_coef: self.value_coef,
            learning_rate: self.learning_rate,
            epochs_per_update: self.epochs_per_update,
            discount: self.discount,
        }
    }

    /// Hex digest of the serialized config, recorded in checkpoints.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Supplies one candidate set per episode id.
pub trait CandidateSource: Sync {
    fn candidates(&self, episode_id: u64) -> Result<Vec<Posture>>;
}

/// Lazily generated uniform candidate sets; nothing is materialized.
#[derive(Debug, Clone)]
pub struct UniformSource {
    pub bounds: AxisBounds,
    pub m: usize,
    pub seed: u64,
}

impl UniformSource {
    pub fn from_config(cfg: &TrainConfig) -> Self {
        Self {
            bounds: cfg.bounds,
            m: cfg.m_candidates,
            seed: cfg.seed,
        }
    }
}

impl CandidateSource for UniformSource {
    fn candidates(&self, episode_id: u64) -> Result<Vec<Posture>> {
        sample_uniform_postures(&self.bounds, self.m, self.seed, episode_id)
    }
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLogEntry {
    pub episode: u64,
    pub reward: f64,
    /// Selected candidate indices, sorted ascending.
    pub selected: Vec<u16>,
}

/// Per-episode rewards and selections of a whole run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub entries: Vec<EpisodeLogEntry>,
}

impl TrainingLog {
    pub fn rewards(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.reward).collect()
    }

    /// Trailing moving average over at most `window` episodes.
    pub fn moving_average(&self, window: usize) -> Vec<f64> {
        let rewards = self.rewards();
        let mut out = Vec::with_capacity(rewards.len());
        let mut acc = 0.0;
        for i in 0..rewards.len() {
            acc += rewards[i];
            if i >= window {
                acc -= rewards[i - window];
            }
            let n = (i + 1).min(window) as f64;
            out.push(acc / n);
        }
        out
    }

    /// Learning-curve CSV: episode, reward, moving_avg_100, moving_avg_1000.
    pub fn write_curve_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        writeln!(w, "episode,reward,moving_avg_100,moving_avg_1000").map_err(|e| Error::io(path, e))?;
        let ma100 = self.moving_average(100);
        let ma1000 = self.moving_average(1000);
        for (i, entry) in self.entries.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{}",
                entry.episode, entry.reward, ma100[i], ma1000[i]
            )
            .map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Trained parameters plus the full training history.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: PolicyParams,
    pub log: TrainingLog,
}

fn sample_categorical(probs: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let u: f64 = rng.random_range(0.0..1.0);
    let mut acc = 0.0;
    let mut last = None;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last = Some(i);
            if u < acc {
                return i;
            }
        }
    }
    last.expect("distribution has support")
}

fn argmax_available(probs: &[f64], mask: &[bool]) -> usize {
    let mut best = None;
    let mut best_p = f64::NEG_INFINITY;
    for (i, &p) in probs.iter().enumerate() {
        if mask[i] && p > best_p {
            best_p = p;
            best = Some(i);
        }
    }
    best.expect("at least one available action")
}

/// Runs one episode under the current params, returning the filled steps,
/// the terminal reward, and the sorted selection.
fn rollout_episode(
    params: &PolicyParams,
    env: &mut SelectionEnv,
    candidates: Vec<Posture>,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<RolloutStep>, f64, Vec<usize>)> {
    let mut features = env.reset(candidates)?;
    let k = env.k();
    let mut steps = Vec::with_capacity(k);
    let mut terminal = 0.0;
    for _ in 0..k {
        let (probs, value) = policy_forward(params, &features, env.mask())?;
        let action = sample_categorical(&probs, rng);
        let log_prob = probs[action].ln();
        steps.push(RolloutStep {
            features: features.clone(),
            action,
            log_prob,
            value,
        });
        let (next, reward, done) = env.step(action)?;
        if done {
            terminal = reward;
        } else {
            features = next.expect("non-terminal step yields a state");
        }
    }
    Ok((steps, terminal, env.sorted_selected()))
}

/// Trains for the fixed episode budget with no early stopping.
///
/// Single-threaded and bit-deterministic under a fixed seed.
pub fn train(cfg: &TrainConfig, source: &dyn CandidateSource) -> Result<TrainOutcome> {
    cfg.validate()?;
    let mut params = PolicyParams::init(cfg.hidden_dim, cfg.seed)?;
    let mut opt = Adam::new(params.n_params());
    let mut env = SelectionEnv::with_options(
        cfg.m_candidates,
        cfg.k_select,
        cfg.reward_scale,
        cfg.stats_source,
    );
    let mut action_rng = stream_rng(cfg.seed, 0, STREAM_ACTION);
    let hyper = cfg.hyper();
    let mut buffer = RolloutBuffer::new(cfg.k_select);
    let mut log = TrainingLog::default();

    for episode in 0..cfg.total_episodes {
        let candidates = source.candidates(episode)?;
        let (steps, terminal, selected) =
            rollout_episode(&params, &mut env, candidates, &mut action_rng)?;
        log.entries.push(EpisodeLogEntry {
            episode,
            reward: terminal,
            selected: selected.iter().map(|&i| i as u16).collect(),
        });
        buffer.push(RolloutEpisode {
            episode_id: episode,
            steps,
            terminal_reward: terminal,
            selected,
        })?;
        if (episode + 1) % cfg.update_every_episodes == 0 {
            ppo_update(&mut params, &mut opt, &buffer, &hyper)?;
            buffer.clear();
        }
    }
    Ok(TrainOutcome { params, log })
}

/// How evaluation picks actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    /// Argmax over available actions (deployment behavior).
    Greedy,
    /// Categorical sampling, seeded.
    Sample { seed: u64 },
}

/// Runs the policy greedily over one candidate set.
pub fn policy_select_greedy(
    params: &PolicyParams,
    candidates: &[Posture],
    k: usize,
) -> Result<SubsetSelection> {
    policy_select(params, candidates, k, None)
}

/// Runs the policy with categorical sampling over one candidate set.
pub fn policy_select_sampled(
    params: &PolicyParams,
    candidates: &[Posture],
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<SubsetSelection> {
    policy_select(params, candidates, k, Some(rng))
}

fn policy_select(
    params: &PolicyParams,
    candidates: &[Posture],
    k: usize,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<SubsetSelection> {
    let mut env = SelectionEnv::new(candidates.len(), k);
    let mut features = env.reset(candidates.to_vec())?;
    for _ in 0..k {
        let (probs, _) = policy_forward(params, &features, env.mask())?;
        let action = match rng.as_deref_mut() {
            Some(r) => sample_categorical(&probs, r),
            None => argmax_available(&probs, env.mask()),
        };
        let (next, _, done) = env.step(action)?;
        if !done {
            features = next.expect("non-terminal step yields a state");
        }
    }
    let indices = env.sorted_selected();
    let objective = subset_objective(candidates, &indices)?.value;
    Ok(SubsetSelection { indices, objective })
}

/// One evaluated episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEpisodeEval {
    pub episode_id: u64,
    pub indices: Vec<usize>,
    pub log_det: f64,
    pub det_s: f64,
}

/// Evaluation summary over a set of episodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEvaluation {
    pub episodes: Vec<PolicyEpisodeEval>,
    pub mean_det: f64,
    pub std_det: f64,
    pub mean_log_det: f64,
    pub std_log_det: f64,
}

pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
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

/// Runs the policy without learning over every episode of a dataset slice.
pub fn evaluate_policy(
    params: &PolicyParams,
    episodes: &[EpisodeData],
    k: usize,
    mode: EvalMode,
) -> Result<PolicyEvaluation> {
    if episodes.is_empty() {
        return Err(Error::EmptyInput { what: "episodes" });
    }
    let mut rng = match mode {
        EvalMode::Greedy => None,
        EvalMode::Sample { seed } => Some(stream_rng(seed, 0, STREAM_EVAL)),
    };
    let mut evals = Vec::with_capacity(episodes.len());
    for ep in episodes {
        let selection = policy_select(params, &ep.inputs, k, rng.as_mut())?;
        let postures: Vec<Posture> = selection.indices.iter().map(|&i| ep.inputs[i]).collect();
        let det_s = det_information(&postures)?;
        let log_det = log_det_objective(&information_matrix(&postures)?).value;
        evals.push(PolicyEpisodeEval {
            episode_id: ep.episode_id,
            indices: selection.indices,
            log_det,
            det_s,
        });
    }
    let dets: Vec<f64> = evals.iter().map(|e| e.det_s).collect();
    let logs: Vec<f64> = evals.iter().map(|e| e.log_det).collect();
    let (mean_det, std_det) = mean_std(&dets);
    let (mean_log_det, std_log_det) = mean_std(&logs);
    Ok(PolicyEvaluation {
        episodes: evals,
        mean_det,
        std_det,
        mean_log_det,
        std_log_det,
    })
}
