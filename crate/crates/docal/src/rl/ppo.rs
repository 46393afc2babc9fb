//! Clipped-surrogate policy optimization over complete selection episodes.
//!
//! Episodes are four steps with a single terminal reward, so returns are
//! plain Monte-Carlo: every step inherits the episode's terminal reward
//! (discount 1). Advantages are normalized per update batch. The loss is the
//! standard clipped surrogate plus value regression and an entropy bonus;
//! its gradient is assembled analytically through [`backward_batch`].

use nalgebra::DVector;

use super::env::FeatureVector;
use super::policy::{backward_batch, forward_batch, Adam, PackedBatch, PolicyParams};
use crate::error::{Error, Result};

/// One stored decision.
#[derive(Debug, Clone)]
pub struct RolloutStep {
    pub features: FeatureVector,
    pub action: usize,
    pub log_prob: f64,
    pub value: f64,
}

/// One complete K-step episode.
#[derive(Debug, Clone)]
pub struct RolloutEpisode {
    pub episode_id: u64,
    pub steps: Vec<RolloutStep>,
    pub terminal_reward: f64,
    /// Selected candidate indices, sorted ascending.
    pub selected: Vec<usize>,
}

/// Episodes collected between policy updates. Only complete episodes enter.
#[derive(Debug, Clone)]
pub struct RolloutBuffer {
    k: usize,
    episodes: Vec<RolloutEpisode>,
}

impl RolloutBuffer {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            episodes: Vec::new(),
        }
    }

    pub fn push(&mut self, episode: RolloutEpisode) -> Result<()> {
        if episode.steps.len() != self.k {
            return Err(Error::IncompleteEpisode {
                steps: episode.steps.len(),
                expected: self.k,
            });
        }
        self.episodes.push(episode);
        Ok(())
    }

    pub fn episodes(&self) -> &[RolloutEpisode] {
        &self.episodes
    }

    pub fn n_episodes(&self) -> usize {
        self.episodes.len()
    }

    pub fn n_steps(&self) -> usize {
        self.episodes.len() * self.k
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.episodes.clear();
    }
}

/// Per-step returns and batch-normalized advantages, flattened in buffer
/// order.
#[derive(Debug, Clone)]
pub struct Returns {
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

/// Monte-Carlo returns for sparse terminal rewards.
///
/// With discount 1 every step's return equals its episode's terminal reward;
/// advantages are `return - value`, normalized to zero mean and unit variance
/// across the batch (guarded by sigma + 1e-8 so constant batches normalize
/// to zero).
pub fn compute_returns(buffer: &RolloutBuffer, discount: f64) -> Result<Returns> {
    if buffer.is_empty() {
        return Err(Error::EmptyInput { what: "rollouts" });
    }
    let mut returns = Vec::with_capacity(buffer.n_steps());
    let mut advantages = Vec::with_capacity(buffer.n_steps());
    for ep in &buffer.episodes {
        if ep.steps.len() != buffer.k {
            return Err(Error::IncompleteEpisode {
                steps: ep.steps.len(),
                expected: buffer.k,
            });
        }
        for (t, step) in ep.steps.iter().enumerate() {
            let horizon = (buffer.k - 1 - t) as i32;
            let ret = ep.terminal_reward * discount.powi(horizon);
            returns.push(ret);
            advantages.push(ret - step.value);
        }
    }
    let n = advantages.len() as f64;
    let mean = advantages.iter().sum::<f64>() / n;
    let var = advantages.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + 1e-8;
    for a in &mut advantages {
        *a = (*a - mean) / denom;
    }
    Ok(Returns {
        returns,
        advantages,
    })
}

/// Everything the loss needs, packed once per update.
pub struct PpoBatch {
    pub packed: PackedBatch,
    pub actions: Vec<usize>,
    pub old_log_probs: Vec<f64>,
    pub returns: Vec<f64>,
    pub advantages: Vec<f64>,
}

impl PpoBatch {
    pub fn from_buffer(buffer: &RolloutBuffer, returns: &Returns) -> Result<Self> {
        let features: Vec<&FeatureVector> = buffer
            .episodes
            .iter()
            .flat_map(|ep| ep.steps.iter().map(|s| &s.features))
            .collect();
        let packed = PackedBatch::from_features(features)?;
        let actions = buffer
            .episodes
            .iter()
            .flat_map(|ep| ep.steps.iter().map(|s| s.action))
            .collect();
        let old_log_probs = buffer
            .episodes
            .iter()
            .flat_map(|ep| ep.steps.iter().map(|s| s.log_prob))
            .collect();
        Ok(Self {
            packed,
            actions,
            old_log_probs,
            returns: returns.returns.clone(),
            advantages: returns.advantages.clone(),
        })
    }
}

/// Multipliers on the three loss terms. The training default is
/// `(1, value_coef, entropy_coef)`; gradient checks probe one term at a time.
#[derive(Debug, Clone, Copy)]
pub struct LossWeights {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
}

/// The three loss terms, before weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    /// -mean(min(ratio * adv, clip(ratio) * adv))
    pub policy: f64,
    /// mean((V - R)^2)
    pub value: f64,
    /// mean entropy of the action distribution
    pub entropy: f64,
    /// Fraction of steps whose ratio left the clip interval.
    pub clip_fraction: f64,
}

impl LossTerms {
    pub fn total(&self, w: &LossWeights) -> f64 {
        w.policy * self.policy + w.value * self.value - w.entropy * self.entropy
    }

    pub fn is_finite(&self) -> bool {
        self.policy.is_finite() && self.value.is_finite() && self.entropy.is_finite()
    }
}

fn per_step_quantities(
    probs: &DVector<f64>,
    mask: &[bool],
    action: usize,
) -> (f64, f64) {
    let logp = probs[action].ln();
    let mut entropy = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        if mask[i] && p > 0.0 {
            entropy -= p * p.ln();
        }
    }
    (logp, entropy)
}

/// Forward-only loss evaluation.
pub fn batch_loss(params: &PolicyParams, batch: &PpoBatch, clip_ratio: f64) -> LossTerms {
    let trace = forward_batch(params, &batch.packed);
    let t_n = batch.packed.n_steps();
    let mut policy = 0.0;
    let mut value = 0.0;
    let mut entropy = 0.0;
    let mut clipped = 0usize;
    for t in 0..t_n {
        let (logp, h) = per_step_quantities(&trace.probs[t], batch.packed.mask(t), batch.actions[t]);
        let ratio = (logp - batch.old_log_probs[t]).exp();
        let adv = batch.advantages[t];
        let surr1 = ratio * adv;
        let surr2 = ratio.clamp(1.0 - clip_ratio, 1.0 + clip_ratio) * adv;
        policy -= surr1.min(surr2);
        if ratio < 1.0 - clip_ratio || ratio > 1.0 + clip_ratio {
            clipped += 1;
        }
        let dv = trace.values[t] - batch.returns[t];
        value += dv * dv;
        entropy += h;
    }
    let n = t_n as f64;
    LossTerms {
        policy: policy / n,
        value: value / n,
        entropy: entropy / n,
        clip_fraction: clipped as f64 / n,
    }
}

/// Loss plus its analytic gradient under the given term weights.
pub fn batch_loss_and_grad(
    params: &PolicyParams,
    batch: &PpoBatch,
    clip_ratio: f64,
    weights: &LossWeights,
) -> (LossTerms, PolicyParams) {
    let trace = forward_batch(params, &batch.packed);
    let t_n = batch.packed.n_steps();
    let n = t_n as f64;
    let m = batch.packed.m();

    let mut policy = 0.0;
    let mut value = 0.0;
    let mut entropy = 0.0;
    let mut clipped = 0usize;
    let mut dscores = Vec::with_capacity(t_n);
    let mut dvalues = Vec::with_capacity(t_n);

    for t in 0..t_n {
        let probs = &trace.probs[t];
        let mask = batch.packed.mask(t);
        let action = batch.actions[t];
        let (logp, h) = per_step_quantities(probs, mask, action);
        let ratio = (logp - batch.old_log_probs[t]).exp();
        let adv = batch.advantages[t];
        let surr1 = ratio * adv;
        let surr2 = ratio.clamp(1.0 - clip_ratio, 1.0 + clip_ratio) * adv;
        policy -= surr1.min(surr2);
        if ratio < 1.0 - clip_ratio || ratio > 1.0 + clip_ratio {
            clipped += 1;
        }
        let dv = trace.values[t] - batch.returns[t];
        value += dv * dv;
        entropy += h;

        // d(policy_loss)/d(logp): the surrogate only moves when the
        // unclipped branch is active (ties go to the unclipped side, whose
        // derivative equals the clipped one inside the interval).
        let g = if surr1 <= surr2 { ratio * adv } else { 0.0 };
        let mut ds = DVector::zeros(m);
        for j in 0..m {
            if !mask[j] {
                continue;
            }
            let p = probs[j];
            let indicator = if j == action { 1.0 } else { 0.0 };
            let d_pol = -(g / n) * (indicator - p);
            let d_ent = if p > 0.0 {
                (p * (p.ln() + h)) / n
            } else {
                0.0
            };
            ds[j] = weights.policy * d_pol + weights.entropy * d_ent;
        }
        dscores.push(ds);
        dvalues.push(weights.value * 2.0 * dv / n);
    }

    let grads = backward_batch(params, &batch.packed, &trace, &dscores, &dvalues);
    let terms = LossTerms {
        policy: policy / n,
        value: value / n,
        entropy: entropy / n,
        clip_fraction: clipped as f64 / n,
    };
    (terms, grads)
}

/// Hyperparameters the update step needs.
#[derive(Debug, Clone, Copy)]
pub struct PpoHyper {
    pub clip_ratio: f64,
    pub entropy_coef: f64,
    pub value_coef: f64,
    pub learning_rate: f64,
    pub epochs_per_update: usize,
    pub discount: f64,
}

/// Loss trajectory of one update.
#[derive(Debug, Clone)]
pub struct UpdateDiagnostics {
    pub epochs: Vec<LossTerms>,
}

/// Runs `epochs_per_update` full-batch gradient steps on the buffered
/// episodes. Aborts (leaving params mid-update) if a loss turns non-finite.
pub fn ppo_update(
    params: &mut PolicyParams,
    opt: &mut Adam,
    buffer: &RolloutBuffer,
    hyper: &PpoHyper,
) -> Result<UpdateDiagnostics> {
    let returns = compute_returns(buffer, hyper.discount)?;
    let batch = PpoBatch::from_buffer(buffer, &returns)?;
    let weights = LossWeights {
        policy: 1.0,
        value: hyper.value_coef,
        entropy: hyper.entropy_coef,
    };
    let mut epochs = Vec::with_capacity(hyper.epochs_per_update);
    for epoch in 0..hyper.epochs_per_update {
        let (terms, grads) = batch_loss_and_grad(params, &batch, hyper.clip_ratio, &weights);
        if !terms.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                detail: format!(
                    "policy={} value={} entropy={} over {} steps",
                    terms.policy,
                    terms.value,
                    terms.entropy,
                    batch.packed.n_steps()
                ),
            });
        }
        opt.step(params, &grads, hyper.learning_rate);
        epochs.push(terms);
    }
    Ok(UpdateDiagnostics { epochs })
}
