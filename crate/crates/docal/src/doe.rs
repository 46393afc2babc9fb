//! D-optimal design of experiments over posture subsets.
//!
//! The information matrix of a posture set is `S = A^T A` for the stacked
//! design `A`; its log-determinant is the selection objective. Selectors pick
//! `K` postures out of `M` candidates: exact enumeration, greedy growth,
//! single-swap exchange refinement, and the uniform random baseline.

use nalgebra::SMatrix;
use rand::Rng;

use crate::calib::{row_block, Posture, PARAM_DIM};
use crate::error::{Error, Result};

pub type Matrix12 = SMatrix<f64, PARAM_DIM, PARAM_DIM>;

/// Objective assigned to subsets whose information matrix is not positive
/// definite (before any reward scaling).
pub const LOG_DET_FLOOR: f64 = -50.0;

/// Ridge added to partial (fewer than 4 postures) information matrices so
/// greedy growth has a finite objective to compare.
pub const PARTIAL_RIDGE: f64 = 1e-9;

/// Largest subset count [`exhaustive_select`] will enumerate.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

/// Maximum improvement passes of [`exchange_improve`].
pub const MAX_EXCHANGE_PASSES: usize = 50;

/// Candidate budget: `M` candidates per episode, `K` of them selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DesignBudget {
    pub m_candidates: usize,
    pub k_select: usize,
}

impl DesignBudget {
    pub fn new(m_candidates: usize, k_select: usize) -> Result<Self> {
        if !(4 <= k_select && k_select < m_candidates) {
            return Err(Error::InvalidArgument(format!(
                "budget requires 4 <= K < M, got K={k_select}, M={m_candidates}"
            )));
        }
        Ok(Self {
            m_candidates,
            k_select,
        })
    }
}

/// The 12x12 information matrix `S = A^T A` of a posture set.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationMatrix {
    s: Matrix12,
    n_postures: usize,
}

impl InformationMatrix {
    /// Wraps an externally built matrix, enforcing the symmetry and
    /// positive-semidefiniteness the type promises.
    pub fn from_matrix(s: Matrix12) -> Result<Self> {
        let scale = s.amax().max(1.0);
        for i in 0..PARAM_DIM {
            for j in (i + 1)..PARAM_DIM {
                if (s[(i, j)] - s[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Format(format!(
                        "information matrix is not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        let eigs = s.symmetric_eigenvalues();
        let floor = -1e-10 * s.trace().abs().max(1.0);
        if eigs.iter().any(|&l| l < floor) {
            return Err(Error::Format(
                "information matrix is not positive semidefinite".into(),
            ));
        }
        Ok(Self { s, n_postures: 0 })
    }

    pub fn matrix(&self) -> &Matrix12 {
        &self.s
    }

    pub fn n_postures(&self) -> usize {
        self.n_postures
    }
}

/// det(S) computed from the R factor of the design's QR factorization:
/// `S = A^T A = R^T R`, so det(S) is the squared product of R's diagonal.
///
/// Factoring A instead of the formed S keeps the error proportional to
/// cond(A) rather than cond(A)^2, which is what lets the square-case
/// identity det(S) = det(A)^2 hold to tight relative tolerance even for
/// poorly conditioned subsets.
pub fn det_information(postures: &[Posture]) -> Result<f64> {
    if postures.len() * 3 < PARAM_DIM {
        // Fewer than four postures cannot span the parameter space.
        for u in postures {
            row_block(u)?;
        }
        return Ok(0.0);
    }
    let design = crate::calib::assemble_design(postures)?;
    let qr = design.matrix().clone().qr();
    let r = qr.r();
    let mut det_a = 1.0;
    for i in 0..PARAM_DIM {
        det_a *= r[(i, i)];
    }
    Ok(det_a * det_a)
}

/// Accumulates `S = A^T A` directly from per-posture blocks.
///
/// An empty list yields the zero matrix, which is what partial selections
/// during sequential growth need.
pub fn information_matrix(postures: &[Posture]) -> Result<InformationMatrix> {
    let mut s = Matrix12::zeros();
    for u in postures {
        let block = row_block(u)?;
        s += block.transpose() * block;
    }
    Ok(InformationMatrix {
        s,
        n_postures: postures.len(),
    })
}

/// Outcome of the log-determinant objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDetObjective {
    /// ln det(S), clamped from below at [`LOG_DET_FLOOR`].
    pub value: f64,
    /// True when the symmetric factorization failed (singular or indefinite).
    pub singular: bool,
}

/// ln det(S) via Cholesky, with floor semantics for degenerate matrices.
pub fn log_det_objective(s: &InformationMatrix) -> LogDetObjective {
    match s.s.cholesky() {
        Some(chol) => {
            let lndet: f64 = (0..PARAM_DIM)
                .map(|i| chol.l_dirty()[(i, i)].ln())
                .sum::<f64>()
                * 2.0;
            LogDetObjective {
                value: lndet.max(LOG_DET_FLOOR),
                singular: false,
            }
        }
        None => LogDetObjective {
            value: LOG_DET_FLOOR,
            singular: true,
        },
    }
}

/// ln det(S + ridge*I); finite for any partial selection.
pub fn ridged_log_det(s: &InformationMatrix, ridge: f64) -> f64 {
    let mut m = s.s;
    for i in 0..PARAM_DIM {
        m[(i, i)] += ridge;
    }
    match m.cholesky() {
        Some(chol) => {
            (0..PARAM_DIM)
                .map(|i| chol.l_dirty()[(i, i)].ln())
                .sum::<f64>()
                * 2.0
        }
        None => LOG_DET_FLOOR,
    }
}

/// A chosen subset of candidate indices with its objective value.
///
/// Indices are unique and stored sorted ascending; the objective is the
/// floored log-determinant of the subset's information matrix evaluated in
/// sorted-index order (the canonical evaluation every consumer reproduces).
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetSelection {
    pub indices: Vec<usize>,
    pub objective: f64,
}

/// Canonical subset objective: postures gathered in sorted-index order.
pub fn subset_objective(candidates: &[Posture], indices: &[usize]) -> Result<LogDetObjective> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    let postures: Vec<Posture> = sorted
        .iter()
        .map(|&i| {
            candidates.get(i).copied().ok_or_else(|| {
                Error::InvalidArgument(format!("candidate index {i} out of range"))
            })
        })
        .collect::<Result<_>>()?;
    Ok(log_det_objective(&information_matrix(&postures)?))
}

fn make_selection(candidates: &[Posture], mut indices: Vec<usize>) -> Result<SubsetSelection> {
    indices.sort_unstable();
    let objective = subset_objective(candidates, &indices)?.value;
    Ok(SubsetSelection { indices, objective })
}

fn binomial(m: u64, k: u64) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((m - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Visits all k-combinations of `0..m` in lexicographic order.
fn for_each_combination(m: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > m {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // Advance to the next lexicographic combination.
        let mut pos = k;
        loop {
            if pos == 0 {
                return;
            }
            pos -= 1;
            if idx[pos] != pos + m - k {
                break;
            }
            if pos == 0 {
                return;
            }
        }
        idx[pos] += 1;
        for j in (pos + 1)..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Globally optimal subset by full enumeration, default cap.
pub fn exhaustive_select(candidates: &[Posture], k: usize) -> Result<SubsetSelection> {
    exhaustive_select_with_cap(candidates, k, DEFAULT_ENUMERATION_CAP)
}

/// Globally optimal subset by full enumeration.
///
/// Ties resolve to the lexicographically smallest index tuple, which the
/// lexicographic enumeration order gives for free with a strict comparison.
pub fn exhaustive_select_with_cap(
    candidates: &[Posture],
    k: usize,
    cap: u64,
) -> Result<SubsetSelection> {
    let m = candidates.len();
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!(
            "cannot select {k} of {m} candidates"
        )));
    }
    let subsets = binomial(m as u64, k as u64);
    if subsets > cap as u128 {
        return Err(Error::EnumerationCapExceeded { subsets, cap });
    }
    let mut best_idx: Option<Vec<usize>> = None;
    let mut best_obj = f64::NEG_INFINITY;
    let mut scratch: Vec<Posture> = Vec::with_capacity(k);
    let mut failure: Option<Error> = None;
    for_each_combination(m, k, |idx| {
        if failure.is_some() {
            return;
        }
        scratch.clear();
        scratch.extend(idx.iter().map(|&i| candidates[i]));
        match information_matrix(&scratch) {
            Ok(s) => {
                let obj = log_det_objective(&s).value;
                if obj > best_obj {
                    best_obj = obj;
                    best_idx = Some(idx.to_vec());
                }
            }
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let indices = best_idx.expect("at least one combination");
    Ok(SubsetSelection {
        indices,
        objective: best_obj,
    })
}

/// Greedy growth: starting empty, repeatedly add the candidate maximizing
/// the ridged log-determinant of the partial information matrix. Ties break
/// to the lowest candidate index.
pub fn greedy_select(candidates: &[Posture], k: usize) -> Result<SubsetSelection> {
    let m = candidates.len();
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!(
            "cannot select {k} of {m} candidates"
        )));
    }
    let mut chosen: Vec<usize> = Vec::with_capacity(k);
    let mut s = information_matrix(&[])?;
    for _ in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for (i, u) in candidates.iter().enumerate() {
            if chosen.contains(&i) {
                continue;
            }
            let block = row_block(u)?;
            let trial = InformationMatrix {
                s: s.s + block.transpose() * block,
                n_postures: s.n_postures + 1,
            };
            let obj = ridged_log_det(&trial, PARTIAL_RIDGE);
            if best.map_or(true, |(_, b)| obj > b) {
                best = Some((i, obj));
            }
        }
        let (pick, _) = best.expect("k <= m leaves a candidate");
        let block = row_block(&candidates[pick])?;
        s = InformationMatrix {
            s: s.s + block.transpose() * block,
            n_postures: s.n_postures + 1,
        };
        chosen.push(pick);
    }
    make_selection(candidates, chosen)
}

/// Fedorov-style refinement: repeatedly applies the best strictly improving
/// single swap (one index out, one in) until a local optimum or the pass cap.
pub fn exchange_improve(
    candidates: &[Posture],
    selection: &SubsetSelection,
) -> Result<SubsetSelection> {
    let m = candidates.len();
    let mut current = selection.indices.clone();
    current.sort_unstable();
    if current.iter().any(|&i| i >= m) {
        return Err(Error::InvalidArgument(
            "selection index out of candidate range".into(),
        ));
    }
    let mut current_obj = subset_objective(candidates, &current)?.value;

    for _pass in 0..MAX_EXCHANGE_PASSES {
        let mut best_swap: Option<(usize, usize, f64)> = None;
        for (slot, &out_idx) in current.iter().enumerate() {
            for in_idx in 0..m {
                if current.contains(&in_idx) {
                    continue;
                }
                let mut trial = current.clone();
                trial[slot] = in_idx;
                let obj = subset_objective(candidates, &trial)?.value;
                if obj > current_obj && best_swap.map_or(true, |(_, _, b)| obj > b) {
                    best_swap = Some((slot, in_idx, obj));
                }
            }
            let _ = out_idx;
        }
        match best_swap {
            Some((slot, in_idx, obj)) => {
                current[slot] = in_idx;
                current.sort_unstable();
                current_obj = obj;
            }
            None => break,
        }
    }
    Ok(SubsetSelection {
        indices: current,
        objective: current_obj,
    })
}

/// Uniform sample of `k` of `m` candidates without replacement.
pub fn random_select<R: Rng>(
    candidates: &[Posture],
    k: usize,
    rng: &mut R,
) -> Result<SubsetSelection> {
    let m = candidates.len();
    if k == 0 || k > m {
        return Err(Error::InvalidArgument(format!(
            "cannot select {k} of {m} candidates"
        )));
    }
    let indices = rand::seq::index::sample(rng, m, k).into_vec();
    make_selection(candidates, indices)
}
