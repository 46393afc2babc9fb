//! Attention-scored actor-critic policy over candidate postures.
//!
//! Every candidate (3 pose values + availability bit) runs through a shared
//! two-layer encoder. A context encoder digests the selection statistics,
//! progress, matrix features, and the mean embedding of already-selected
//! candidates. The actor scores each available candidate by a scaled dot
//! product between the context query and the candidate key; the critic reads
//! a scalar value off the context. Unavailable candidates get exactly zero
//! probability.
//!
//! The network is small and fixed, so forward and reverse passes are written
//! out by hand; gradients are validated against finite differences in the
//! test suite.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::env::{feature_len, FeatureVector, CONTEXT_DIM};
use crate::error::{Error, Result};
use crate::sim::stream_rng;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

const STREAM_INIT: u64 = 0x504f4c49;

/// Inputs per candidate column: pitch, yaw, roll, availability.
const CAND_IN: usize = 4;

/// Weights of the shared encoders plus the actor and critic heads.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    hidden_dim: usize,
    // Shared per-candidate encoder.
    w1: DMatrix<f64>,
    b1: DVector<f64>,
    w2: DMatrix<f64>,
    b2: DVector<f64>,
    // Shared context encoder.
    wc1: DMatrix<f64>,
    bc1: DVector<f64>,
    wc2: DMatrix<f64>,
    bc2: DVector<f64>,
    // Actor head: query and key projections.
    wq: DMatrix<f64>,
    bq: DVector<f64>,
    wk: DMatrix<f64>,
    bk: DVector<f64>,
    // Critic head.
    wv1: DMatrix<f64>,
    bv1: DVector<f64>,
    wv2: DVector<f64>,
    bv2: f64,
}

fn xavier(rows: usize, cols: usize, rng: &mut impl Rng) -> DMatrix<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-a..a))
}

impl PolicyParams {
    /// Fresh parameters: hidden layers Xavier-uniform from a seeded stream,
    /// output layers (actor query, critic readout) zeroed so the initial
    /// policy is uniform over available actions and the initial value is 0.
    pub fn init(hidden_dim: usize, seed: u64) -> Result<Self> {
        Self::check_dim(hidden_dim)?;
        let d = hidden_dim;
        let dk = d / 2;
        let dv = d / 4;
        let mut rng = stream_rng(seed, 0, STREAM_INIT);
        Ok(Self {
            hidden_dim: d,
            w1: xavier(d, CAND_IN, &mut rng),
            b1: DVector::zeros(d),
            w2: xavier(d, d, &mut rng),
            b2: DVector::zeros(d),
            wc1: xavier(d, CONTEXT_DIM + d, &mut rng),
            bc1: DVector::zeros(d),
            wc2: xavier(d, d, &mut rng),
            bc2: DVector::zeros(d),
            wq: DMatrix::zeros(dk, d),
            bq: DVector::zeros(dk),
            wk: xavier(dk, d, &mut rng),
            bk: DVector::zeros(dk),
            wv1: xavier(dv, d, &mut rng),
            bv1: DVector::zeros(dv),
            wv2: DVector::zeros(dv),
            bv2: 0.0,
        })
    }

    /// All-zero parameters of the same shape (gradient/optimizer buffers).
    pub fn zeros(hidden_dim: usize) -> Result<Self> {
        Self::check_dim(hidden_dim)?;
        let d = hidden_dim;
        let dk = d / 2;
        let dv = d / 4;
        Ok(Self {
            hidden_dim: d,
            w1: DMatrix::zeros(d, CAND_IN),
            b1: DVector::zeros(d),
            w2: DMatrix::zeros(d, d),
            b2: DVector::zeros(d),
            wc1: DMatrix::zeros(d, CONTEXT_DIM + d),
            bc1: DVector::zeros(d),
            wc2: DMatrix::zeros(d, d),
            bc2: DVector::zeros(d),
            wq: DMatrix::zeros(dk, d),
            bq: DVector::zeros(dk),
            wk: DMatrix::zeros(dk, d),
            bk: DVector::zeros(dk),
            wv1: DMatrix::zeros(dv, d),
            bv1: DVector::zeros(dv),
            wv2: DVector::zeros(dv),
            bv2: 0.0,
        })
    }

    fn check_dim(hidden_dim: usize) -> Result<()> {
        if hidden_dim < 4 || hidden_dim % 4 != 0 {
            return Err(Error::InvalidArgument(format!(
                "hidden_dim must be a positive multiple of 4, got {hidden_dim}"
            )));
        }
        Ok(())
    }

    pub fn hidden_dim(&self) -> usize {
        self.hidden_dim
    }

    pub fn shared_param_count(&self) -> usize {
        self.w1.len()
            + self.b1.len()
            + self.w2.len()
            + self.b2.len()
            + self.wc1.len()
            + self.bc1.len()
            + self.wc2.len()
            + self.bc2.len()
    }

    pub fn actor_param_count(&self) -> usize {
        self.wq.len() + self.bq.len() + self.wk.len() + self.bk.len()
    }

    pub fn critic_param_count(&self) -> usize {
        self.wv1.len() + self.bv1.len() + self.wv2.len() + 1
    }

    pub fn n_params(&self) -> usize {
        self.shared_param_count() + self.actor_param_count() + self.critic_param_count()
    }

    /// Fraction of parameters living in the shared encoders.
    pub fn shared_fraction(&self) -> f64 {
        self.shared_param_count() as f64 / self.n_params() as f64
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each(|v| ok &= v.is_finite());
        ok
    }

    /// Visits every parameter in the fixed flat order
    /// (shared encoders, actor head, critic head).
    pub fn for_each(&self, mut f: impl FnMut(f64)) {
        // Order matters: keep in sync with `for_each_mut`.
        self.w1.iter().for_each(|&v| f(v));
        self.b1.iter().for_each(|&v| f(v));
        self.w2.iter().for_each(|&v| f(v));
        self.b2.iter().for_each(|&v| f(v));
        self.wc1.iter().for_each(|&v| f(v));
        self.bc1.iter().for_each(|&v| f(v));
        self.wc2.iter().for_each(|&v| f(v));
        self.bc2.iter().for_each(|&v| f(v));
        self.wq.iter().for_each(|&v| f(v));
        self.bq.iter().for_each(|&v| f(v));
        self.wk.iter().for_each(|&v| f(v));
        self.bk.iter().for_each(|&v| f(v));
        self.wv1.iter().for_each(|&v| f(v));
        self.bv1.iter().for_each(|&v| f(v));
        self.wv2.iter().for_each(|&v| f(v));
        f(self.bv2);
    }

    pub fn for_each_mut(&mut self, mut f: impl FnMut(&mut f64)) {
        self.w1.iter_mut().for_each(&mut f);
        self.b1.iter_mut().for_each(&mut f);
        self.w2.iter_mut().for_each(&mut f);
        self.b2.iter_mut().for_each(&mut f);
        self.wc1.iter_mut().for_each(&mut f);
        self.bc1.iter_mut().for_each(&mut f);
        self.wc2.iter_mut().for_each(&mut f);
        self.bc2.iter_mut().for_each(&mut f);
        self.wq.iter_mut().for_each(&mut f);
        self.bq.iter_mut().for_each(&mut f);
        self.wk.iter_mut().for_each(&mut f);
        self.bk.iter_mut().for_each(&mut f);
        self.wv1.iter_mut().for_each(&mut f);
        self.bv1.iter_mut().for_each(&mut f);
        self.wv2.iter_mut().for_each(&mut f);
        f(&mut self.bv2);
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        self.for_each(|v| out.push(v));
        out
    }

    pub fn set_from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_params() {
            return Err(Error::LengthMismatch {
                left_name: "flat weights",
                left: flat.len(),
                right_name: "parameters",
                right: self.n_params(),
            });
        }
        let mut it = flat.iter();
        self.for_each_mut(|v| *v = *it.next().expect("length checked"));
        Ok(())
    }

    fn layers(&self) -> Vec<(&'static str, usize, usize, Vec<f64>)> {
        let mat = |m: &DMatrix<f64>| m.iter().copied().collect::<Vec<f64>>();
        let vec = |v: &DVector<f64>| v.iter().copied().collect::<Vec<f64>>();
        vec![
            ("w1", self.w1.nrows(), self.w1.ncols(), mat(&self.w1)),
            ("b1", self.b1.len(), 1, vec(&self.b1)),
            ("w2", self.w2.nrows(), self.w2.ncols(), mat(&self.w2)),
            ("b2", self.b2.len(), 1, vec(&self.b2)),
            ("wc1", self.wc1.nrows(), self.wc1.ncols(), mat(&self.wc1)),
            ("bc1", self.bc1.len(), 1, vec(&self.bc1)),
            ("wc2", self.wc2.nrows(), self.wc2.ncols(), mat(&self.wc2)),
            ("bc2", self.bc2.len(), 1, vec(&self.bc2)),
            ("wq", self.wq.nrows(), self.wq.ncols(), mat(&self.wq)),
            ("bq", self.bq.len(), 1, vec(&self.bq)),
            ("wk", self.wk.nrows(), self.wk.ncols(), mat(&self.wk)),
            ("bk", self.bk.len(), 1, vec(&self.bk)),
            ("wv1", self.wv1.nrows(), self.wv1.ncols(), mat(&self.wv1)),
            ("bv1", self.bv1.len(), 1, vec(&self.bv1)),
            ("wv2", self.wv2.len(), 1, vec(&self.wv2)),
            ("bv2", 1, 1, vec![self.bv2]),
        ]
    }
}

/// A batch of states packed for matrix-level forward/backward passes.
#[derive(Debug, Clone)]
pub struct PackedBatch {
    m: usize,
    n_steps: usize,
    cand_in: DMatrix<f64>,
    ctx_base: DMatrix<f64>,
    masks: Vec<Vec<bool>>,
    selected: Vec<Vec<usize>>,
}

impl PackedBatch {
    pub fn from_features<'a, I>(features: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FeatureVector>,
    {
        let feats: Vec<&FeatureVector> = features.into_iter().collect();
        if feats.is_empty() {
            return Err(Error::EmptyInput { what: "features" });
        }
        let m = feats[0].m();
        let masks: Vec<Vec<bool>> = feats.iter().map(|f| f.mask()).collect();
        Self::build(&feats, m, masks)
    }

    pub fn single(features: &FeatureVector, mask: &[bool]) -> Result<Self> {
        if mask.len() != features.m() {
            return Err(Error::LengthMismatch {
                left_name: "mask",
                left: mask.len(),
                right_name: "candidates",
                right: features.m(),
            });
        }
        Self::build(&[features], features.m(), vec![mask.to_vec()])
    }

    fn build(feats: &[&FeatureVector], m: usize, masks: Vec<Vec<bool>>) -> Result<Self> {
        let n_steps = feats.len();
        let mut cand_in = DMatrix::zeros(CAND_IN, n_steps * m);
        let mut ctx_base = DMatrix::zeros(CONTEXT_DIM, n_steps);
        let mut selected = Vec::with_capacity(n_steps);
        for (t, f) in feats.iter().enumerate() {
            if f.m() != m || f.values().len() != feature_len(m) {
                return Err(Error::InvalidArgument(
                    "inconsistent feature vector layout in batch".into(),
                ));
            }
            if !masks[t].iter().any(|&a| a) {
                return Err(Error::InvalidArgument(
                    "mask leaves no available action".into(),
                ));
            }
            let poses = f.poses();
            let avail = f.availability();
            for i in 0..m {
                let col = t * m + i;
                cand_in[(0, col)] = poses[3 * i];
                cand_in[(1, col)] = poses[3 * i + 1];
                cand_in[(2, col)] = poses[3 * i + 2];
                cand_in[(3, col)] = avail[i];
            }
            let base = &f.values()[4 * m..];
            for j in 0..CONTEXT_DIM {
                ctx_base[(j, t)] = base[j];
            }
            // Selected candidates are the ones flagged unavailable in the
            // state; they feed the mean-pooled context embedding.
            selected.push(
                (0..m)
                    .filter(|&i| avail[i] == 0.0)
                    .collect::<Vec<usize>>(),
            );
        }
        Ok(Self {
            m,
            n_steps,
            cand_in,
            ctx_base,
            masks,
            selected,
        })
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn mask(&self, t: usize) -> &[bool] {
        &self.masks[t]
    }
}

/// Intermediate activations kept for the reverse pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    h1: DMatrix<f64>,
    e: DMatrix<f64>,
    k: DMatrix<f64>,
    ctx_in: DMatrix<f64>,
    c1: DMatrix<f64>,
    c: DMatrix<f64>,
    q: DMatrix<f64>,
    v1: DMatrix<f64>,
    /// State-value estimate per step.
    pub values: Vec<f64>,
    /// Raw attention scores per step (unavailable entries hold 0, unused).
    pub scores: Vec<DVector<f64>>,
    /// Action distribution per step; exact zeros on unavailable actions.
    pub probs: Vec<DVector<f64>>,
}

fn affine(w: &DMatrix<f64>, x: &DMatrix<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    let mut out = w * x;
    for mut col in out.column_iter_mut() {
        col += b;
    }
    out
}

fn tanh_inplace(m: &mut DMatrix<f64>) {
    m.apply(|v| *v = v.tanh());
}

/// Batched forward pass.
pub fn forward_batch(params: &PolicyParams, batch: &PackedBatch) -> ForwardTrace {
    let d = params.hidden_dim;
    let dk = d / 2;
    let scale = 1.0 / (dk as f64).sqrt();
    let m = batch.m;
    let b = batch.n_steps;

    let mut h1 = affine(&params.w1, &batch.cand_in, &params.b1);
    tanh_inplace(&mut h1);
    let mut e = affine(&params.w2, &h1, &params.b2);
    tanh_inplace(&mut e);
    let k = affine(&params.wk, &e, &params.bk);

    let mut ctx_in = DMatrix::zeros(CONTEXT_DIM + d, b);
    ctx_in
        .view_mut((0, 0), (CONTEXT_DIM, b))
        .copy_from(&batch.ctx_base);
    for t in 0..b {
        let sel = &batch.selected[t];
        if !sel.is_empty() {
            let inv = 1.0 / sel.len() as f64;
            for &i in sel {
                let col = e.column(t * m + i);
                for r in 0..d {
                    ctx_in[(CONTEXT_DIM + r, t)] += col[r] * inv;
                }
            }
        }
    }

    let mut c1 = affine(&params.wc1, &ctx_in, &params.bc1);
    tanh_inplace(&mut c1);
    let mut c = affine(&params.wc2, &c1, &params.bc2);
    tanh_inplace(&mut c);
    let q = affine(&params.wq, &c, &params.bq);
    let mut v1 = affine(&params.wv1, &c, &params.bv1);
    tanh_inplace(&mut v1);

    let mut values = Vec::with_capacity(b);
    let mut scores = Vec::with_capacity(b);
    let mut probs = Vec::with_capacity(b);
    for t in 0..b {
        values.push(params.wv2.dot(&v1.column(t).clone_owned()) + params.bv2);

        let mut s = DVector::zeros(m);
        let qt = q.column(t);
        for i in 0..m {
            if batch.masks[t][i] {
                s[i] = qt.dot(&k.column(t * m + i)) * scale;
            }
        }
        // Masked softmax: unavailable actions never enter the normalization
        // and keep exactly zero probability.
        let mut max_s = f64::NEG_INFINITY;
        for i in 0..m {
            if batch.masks[t][i] && s[i] > max_s {
                max_s = s[i];
            }
        }
        let mut p = DVector::zeros(m);
        let mut z = 0.0;
        for i in 0..m {
            if batch.masks[t][i] {
                let ev = (s[i] - max_s).exp();
                p[i] = ev;
                z += ev;
            }
        }
        p /= z;
        scores.push(s);
        probs.push(p);
    }

    ForwardTrace {
        h1,
        e,
        k,
        ctx_in,
        c1,
        c,
        q,
        v1,
        values,
        scores,
        probs,
    }
}

/// Single-state forward pass: action distribution plus state value.
///
/// `mask[i] = true` marks candidate `i` as available; masked candidates get
/// exactly zero probability. At least one action must remain available.
pub fn policy_forward(
    params: &PolicyParams,
    features: &FeatureVector,
    mask: &[bool],
) -> Result<(Vec<f64>, f64)> {
    let batch = PackedBatch::single(features, mask)?;
    let trace = forward_batch(params, &batch);
    Ok((trace.probs[0].iter().copied().collect(), trace.values[0]))
}

/// Reverse pass: given d(loss)/d(score) per step and d(loss)/d(value) per
/// step, produces d(loss)/d(params). Masked score entries must be zero.
pub fn backward_batch(
    params: &PolicyParams,
    batch: &PackedBatch,
    trace: &ForwardTrace,
    dscores: &[DVector<f64>],
    dvalues: &[f64],
) -> PolicyParams {
    let d = params.hidden_dim;
    let dk = d / 2;
    let scale = 1.0 / (dk as f64).sqrt();
    let m = batch.m;
    let b = batch.n_steps;
    let mut g = PolicyParams::zeros(d).expect("valid dim");

    // Score gradients fan out to the query (per step) and keys (per column).
    let mut dq = DMatrix::zeros(dk, b);
    let mut dkk = DMatrix::zeros(dk, b * m);
    for t in 0..b {
        let ds = &dscores[t];
        let qt = trace.q.column(t).clone_owned();
        for i in 0..m {
            let w = ds[i];
            if w != 0.0 {
                let kcol = trace.k.column(t * m + i);
                for r in 0..dk {
                    dq[(r, t)] += w * kcol[r] * scale;
                    dkk[(r, t * m + i)] = w * qt[r] * scale;
                }
            }
        }
    }

    // Critic head.
    let dval = DVector::from_row_slice(dvalues);
    let mut dzv1 = &params.wv2 * dval.transpose(); // dv x B
    for t in 0..b {
        for r in 0..dzv1.nrows() {
            let v = trace.v1[(r, t)];
            dzv1[(r, t)] *= 1.0 - v * v;
        }
    }
    g.wv2 = &trace.v1 * &dval;
    g.bv2 = dval.sum();
    g.wv1 = &dzv1 * trace.c.transpose();
    g.bv1 = dzv1.column_sum();

    // Context gradient collects the actor query and critic paths.
    let mut dc = params.wq.transpose() * &dq + params.wv1.transpose() * &dzv1;
    g.wq = &dq * trace.c.transpose();
    g.bq = dq.column_sum();

    for t in 0..b {
        for r in 0..d {
            let v = trace.c[(r, t)];
            dc[(r, t)] *= 1.0 - v * v;
        }
    }
    g.wc2 = &dc * trace.c1.transpose();
    g.bc2 = dc.column_sum();
    let mut dc1 = params.wc2.transpose() * &dc;
    for t in 0..b {
        for r in 0..d {
            let v = trace.c1[(r, t)];
            dc1[(r, t)] *= 1.0 - v * v;
        }
    }
    g.wc1 = &dc1 * trace.ctx_in.transpose();
    g.bc1 = dc1.column_sum();
    let dctx = params.wc1.transpose() * &dc1; // (CONTEXT_DIM + d) x B

    // Candidate embeddings receive gradient from the key projection and the
    // mean pooling into the context.
    let mut de = params.wk.transpose() * &dkk;
    g.wk = &dkk * trace.e.transpose();
    g.bk = dkk.column_sum();
    for t in 0..b {
        let sel = &batch.selected[t];
        if !sel.is_empty() {
            let inv = 1.0 / sel.len() as f64;
            for &i in sel {
                for r in 0..d {
                    de[(r, t * m + i)] += dctx[(CONTEXT_DIM + r, t)] * inv;
                }
            }
        }
    }

    let mut dz2 = de;
    for col in 0..b * m {
        for r in 0..d {
            let v = trace.e[(r, col)];
            dz2[(r, col)] *= 1.0 - v * v;
        }
    }
    g.w2 = &dz2 * trace.h1.transpose();
    g.b2 = dz2.column_sum();
    let mut dz1 = params.w2.transpose() * &dz2;
    for col in 0..b * m {
        for r in 0..d {
            let v = trace.h1[(r, col)];
            dz1[(r, col)] *= 1.0 - v * v;
        }
    }
    g.w1 = &dz1 * batch.cand_in.transpose();
    g.b1 = dz1.column_sum();

    g
}

/// First-order adaptive optimizer state (Adam).
#[derive(Debug, Clone)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut PolicyParams, grads: &PolicyParams, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let g = grads.to_flat();
        let mut i = 0;
        params.for_each_mut(|p| {
            let gi = g[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * gi;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * gi * gi;
            let mhat = self.m[i] / bc1;
            let vhat = self.v[i] / bc2;
            *p -= lr * mhat / (vhat.sqrt() + self.eps);
            i += 1;
        });
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointLayer {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Metadata stored next to the weights in a checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub config_digest: String,
    pub hidden_dim: usize,
    pub trained_episodes: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CheckpointFile {
    format_version: u32,
    config_digest: String,
    hidden_dim: usize,
    trained_episodes: u64,
    seed: u64,
    layers: Vec<CheckpointLayer>,
}

/// Writes a versioned JSON checkpoint loadable without the trainer.
pub fn save_checkpoint(params: &PolicyParams, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        format_version: CHECKPOINT_FORMAT_VERSION,
        config_digest: meta.config_digest.clone(),
        hidden_dim: params.hidden_dim,
        trained_episodes: meta.trained_episodes,
        seed: meta.seed,
        layers: params
            .layers()
            .into_iter()
            .map(|(name, rows, cols, data)| CheckpointLayer {
                name: name.to_string(),
                rows,
                cols,
                data,
            })
            .collect(),
    };
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(f);
    serde_json::to_writer(&mut w, &file).map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<(PolicyParams, CheckpointMeta)> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let file: CheckpointFile = serde_json::from_reader(BufReader::new(f))
        .map_err(|e| Error::Format(format!("checkpoint: {e}")))?;
    if file.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint format version {}",
            file.format_version
        )));
    }
    let mut params = PolicyParams::zeros(file.hidden_dim)?;
    let expected = params.layers();
    if file.layers.len() != expected.len() {
        return Err(Error::Format(format!(
            "checkpoint has {} layers, expected {}",
            file.layers.len(),
            expected.len()
        )));
    }
    let mut flat = Vec::with_capacity(params.n_params());
    for (layer, (name, rows, cols, _)) in file.layers.iter().zip(&expected) {
        if layer.name != *name || layer.rows != *rows || layer.cols != *cols {
            return Err(Error::Format(format!(
                "checkpoint layer {} ({}x{}) does not match expected {} ({}x{})",
                layer.name, layer.rows, layer.cols, name, rows, cols
            )));
        }
        if layer.data.len() != rows * cols {
            return Err(Error::Format(format!(
                "checkpoint layer {} has {} values, expected {}",
                layer.name,
                layer.data.len(),
                rows * cols
            )));
        }
        flat.extend_from_slice(&layer.data);
    }
    params.set_from_flat(&flat)?;
    let meta = CheckpointMeta {
        config_digest: file.config_digest,
        hidden_dim: file.hidden_dim,
        trained_episodes: file.trained_episodes,
        seed: file.seed,
    };
    Ok((params, meta))
}
