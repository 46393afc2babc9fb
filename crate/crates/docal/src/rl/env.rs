//! Sequential posture-selection environment.
//!
//! An episode presents M candidate postures; the agent picks K of them one
//! at a time. Intermediate steps pay nothing; completing the K-th pick pays
//! the scaled log-determinant of the selected subset's information matrix.

use serde::{Deserialize, Serialize};

use crate::calib::{MeasuredPosture, Posture};
use crate::doe::{
    information_matrix, log_det_objective, ridged_log_det, LOG_DET_FLOOR, PARTIAL_RIDGE,
};
use crate::error::{Error, Result};

/// Candidate count the policy is normally trained with.
pub const DEFAULT_M: usize = 50;

/// Selections per episode.
pub const DEFAULT_K: usize = 4;

/// Context features appended after the per-candidate blocks:
/// 6 selection statistics, 1 progress scalar, 3 matrix features.
pub const CONTEXT_DIM: usize = 10;

/// Default terminal reward scale (log-determinant divided by ten).
pub const DEFAULT_REWARD_SCALE: f64 = 0.1;

/// Feature vector length for `m` candidates: poses (3m), availability (m),
/// statistics (6), progress (1), matrix features (3). 210 for m = 50.
pub fn feature_len(m: usize) -> usize {
    4 * m + CONTEXT_DIM
}

/// Which postures feed the selection-statistics block.
///
/// `Inputs` keeps the deployed policy independent of any measured response;
/// the `Outputs` variant exists for side-by-side study and requires episodes
/// that carry measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum StatsSource {
    #[default]
    Inputs,
    Outputs,
}

/// Flat state vector with the layout documented on [`feature_len`].
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    m: usize,
}

impl FeatureVector {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn poses(&self) -> &[f64] {
        &self.values[..3 * self.m]
    }

    pub fn availability(&self) -> &[f64] {
        &self.values[3 * self.m..4 * self.m]
    }

    pub fn statistics(&self) -> &[f64] {
        &self.values[4 * self.m..4 * self.m + 6]
    }

    pub fn progress(&self) -> f64 {
        self.values[4 * self.m + 6]
    }

    pub fn matrix_features(&self) -> &[f64] {
        &self.values[4 * self.m + 7..]
    }

    /// Availability block as a boolean mask.
    pub fn mask(&self) -> Vec<bool> {
        self.availability().iter().map(|&a| a > 0.5).collect()
    }
}

/// The selection environment. One instance handles one episode at a time.
#[derive(Debug, Clone)]
pub struct SelectionEnv {
    m: usize,
    k: usize,
    reward_scale: f64,
    stats_source: StatsSource,
    candidates: Vec<Posture>,
    outputs: Option<Vec<MeasuredPosture>>,
    selected: Vec<usize>,
    availability: Vec<bool>,
}

impl SelectionEnv {
    pub fn new(m: usize, k: usize) -> Self {
        Self::with_options(m, k, DEFAULT_REWARD_SCALE, StatsSource::Inputs)
    }

    pub fn with_options(m: usize, k: usize, reward_scale: f64, stats_source: StatsSource) -> Self {
        Self {
            m,
            k,
            reward_scale,
            stats_source,
            candidates: Vec::new(),
            outputs: None,
            selected: Vec::new(),
            availability: Vec::new(),
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Starts a new episode over `candidates` and returns the initial state.
    pub fn reset(&mut self, candidates: Vec<Posture>) -> Result<FeatureVector> {
        self.reset_with_outputs(candidates, None)
    }

    /// Starts a new episode, optionally attaching measured outputs (needed
    /// only when the statistics block is configured to read them).
    pub fn reset_with_outputs(
        &mut self,
        candidates: Vec<Posture>,
        outputs: Option<Vec<MeasuredPosture>>,
    ) -> Result<FeatureVector> {
        if candidates.len() != self.m {
            return Err(Error::InvalidArgument(format!(
                "expected {} candidates, got {}",
                self.m,
                candidates.len()
            )));
        }
        for p in &candidates {
            if !p.is_finite() {
                return Err(Error::NonFinite("candidate posture"));
            }
            for v in [p.pitch, p.yaw, p.roll] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidArgument(format!(
                        "candidate component {v} outside normalized range [0, 1]"
                    )));
                }
            }
        }
        if let Some(ref outs) = outputs {
            if outs.len() != candidates.len() {
                return Err(Error::LengthMismatch {
                    left_name: "candidates",
                    left: candidates.len(),
                    right_name: "outputs",
                    right: outs.len(),
                });
            }
        }
        if self.stats_source == StatsSource::Outputs && outputs.is_none() {
            return Err(Error::MissingOutputs);
        }
        self.candidates = candidates;
        self.outputs = outputs;
        self.selected.clear();
        self.availability = vec![true; self.m];
        Ok(self.featurize())
    }

    pub fn mask(&self) -> &[bool] {
        &self.availability
    }

    /// Indices picked so far, in action order.
    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Indices picked so far, sorted ascending (the canonical subset form).
    pub fn sorted_selected(&self) -> Vec<usize> {
        let mut s = self.selected.clone();
        s.sort_unstable();
        s
    }

    pub fn step_index(&self) -> usize {
        self.selected.len()
    }

    pub fn is_done(&self) -> bool {
        self.selected.len() == self.k
    }

    /// Applies one selection. Steps before the K-th return reward 0; the
    /// K-th returns the floored log-determinant of the chosen subset scaled
    /// by the reward scale, and no successor state.
    pub fn step(&mut self, action: usize) -> Result<(Option<FeatureVector>, f64, bool)> {
        if self.is_done() {
            return Err(Error::InvalidArgument("episode already finished".into()));
        }
        if action >= self.m || !self.availability[action] {
            return Err(Error::UnavailableAction { action });
        }
        self.availability[action] = false;
        self.selected.push(action);
        if self.is_done() {
            let reward = self.terminal_objective()?.value * self.reward_scale;
            Ok((None, reward, true))
        } else {
            Ok((Some(self.featurize()), 0.0, false))
        }
    }

    /// Canonical objective of the currently selected subset (sorted order).
    pub fn terminal_objective(&self) -> Result<crate::doe::LogDetObjective> {
        let postures = self.selected_postures_sorted();
        Ok(log_det_objective(&information_matrix(&postures)?))
    }

    fn selected_postures_sorted(&self) -> Vec<Posture> {
        self.sorted_selected()
            .iter()
            .map(|&i| self.candidates[i])
            .collect()
    }

    /// Builds the state vector for the current selection.
    pub fn featurize(&self) -> FeatureVector {
        let m = self.m;
        let mut values = vec![0.0; feature_len(m)];
        for (i, p) in self.candidates.iter().enumerate() {
            values[3 * i] = p.pitch;
            values[3 * i + 1] = p.yaw;
            values[3 * i + 2] = p.roll;
        }
        for (i, &avail) in self.availability.iter().enumerate() {
            values[3 * m + i] = if avail { 1.0 } else { 0.0 };
        }

        // Statistics block: per-axis mean and population standard deviation
        // of the already-selected postures, iterated in sorted index order so
        // the block is independent of selection order.
        let chosen = self.sorted_selected();
        if !chosen.is_empty() {
            let n = chosen.len() as f64;
            let triple = |i: usize| -> [f64; 3] {
                match self.stats_source {
                    StatsSource::Inputs => self.candidates[i].into(),
                    StatsSource::Outputs => {
                        let outs = self.outputs.as_ref().expect("checked at reset");
                        outs[i].into()
                    }
                }
            };
            let mut mean = [0.0; 3];
            for &i in &chosen {
                let v = triple(i);
                for a in 0..3 {
                    mean[a] += v[a];
                }
            }
            for a in 0..3 {
                mean[a] /= n;
            }
            let mut var = [0.0; 3];
            for &i in &chosen {
                let v = triple(i);
                for a in 0..3 {
                    var[a] += (v[a] - mean[a]).powi(2);
                }
            }
            for a in 0..3 {
                values[4 * m + a] = mean[a];
                values[4 * m + 3 + a] = (var[a] / n).sqrt();
            }
        }

        values[4 * m + 6] = self.selected.len() as f64 / self.k as f64;

        // Matrix features of the partial information matrix.
        let s = information_matrix(&self.selected_postures_sorted())
            .expect("candidates validated at reset");
        values[4 * m + 7] = ridged_log_det(&s, PARTIAL_RIDGE).max(LOG_DET_FLOOR) / 100.0;
        values[4 * m + 8] = s.matrix().trace() / 12.0;
        let eigs = s.matrix().symmetric_eigenvalues();
        let above = eigs.iter().filter(|&&l| l > 1e-8).count();
        values[4 * m + 9] = above as f64 / 12.0;

        FeatureVector { values, m }
    }
}
