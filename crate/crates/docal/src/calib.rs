//! Linear calibration model for a 3-input/3-output plant.
//!
//! The plant is modelled as `Y = X_A * U + X_B` with a 3x3 scaling/coupling
//! matrix `X_A` and a bias vector `X_B`. Stacking the twelve unknowns as
//! `X = [vec(X_A); X_B]` turns every measurement into three linear rows, so
//! the whole identification problem is ordinary least squares on a 3N x 12
//! design matrix. This module owns that reformulation, the identifier, the
//! forward/inverse maps, residual summaries, and the motor pulse/angle
//! conversion.

use nalgebra::{DMatrix, DVector, Matrix3, SMatrix, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of unknown calibration parameters.
pub const PARAM_DIM: usize = 12;

/// Relative singular-value threshold for numerical rank decisions.
pub const RANK_TOL_REL: f64 = 1e-10;

/// Default condition-number cap for inverting the calibration map.
pub const DEFAULT_COND_CAP: f64 = 1e12;

/// A 3x12 regression block, one per posture.
pub type RowBlock = SMatrix<f64, 3, PARAM_DIM>;

/// Commanded input posture (pitch, yaw, roll).
///
/// Units are whatever the surrounding dataset declares: degrees for
/// physical-range data, dimensionless for normalized data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Posture {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

/// Measured output posture (pitch, yaw, roll).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct MeasuredPosture {
    pub pitch: f64,
    pub yaw: f64,
    pub roll: f64,
}

macro_rules! triple_conversions {
    ($ty:ident) => {
        impl $ty {
            pub fn new(pitch: f64, yaw: f64, roll: f64) -> Self {
                Self { pitch, yaw, roll }
            }

            pub fn as_vector(&self) -> Vector3<f64> {
                Vector3::new(self.pitch, self.yaw, self.roll)
            }

            pub fn from_vector(v: Vector3<f64>) -> Self {
                Self::new(v.x, v.y, v.z)
            }

            pub fn is_finite(&self) -> bool {
                self.pitch.is_finite() && self.yaw.is_finite() && self.roll.is_finite()
            }
        }

        impl From<[f64; 3]> for $ty {
            fn from(a: [f64; 3]) -> Self {
                Self::new(a[0], a[1], a[2])
            }
        }

        impl From<$ty> for [f64; 3] {
            fn from(p: $ty) -> Self {
                [p.pitch, p.yaw, p.roll]
            }
        }
    };
}

triple_conversions!(Posture);
triple_conversions!(MeasuredPosture);

/// The 12 calibration unknowns, ordered as the row-major vec of `X_A`
/// followed by `X_B`: `[a11, a12, a13, a21, a22, a23, a31, a32, a33, bx, by, bz]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector(pub [f64; PARAM_DIM]);

impl ParameterVector {
    pub fn identity() -> Self {
        let mut e = [0.0; PARAM_DIM];
        e[0] = 1.0;
        e[4] = 1.0;
        e[8] = 1.0;
        ParameterVector(e)
    }

    pub fn from_parts(x_a: &Matrix3<f64>, x_b: &Vector3<f64>) -> Self {
        let mut e = [0.0; PARAM_DIM];
        for r in 0..3 {
            for c in 0..3 {
                e[3 * r + c] = x_a[(r, c)];
            }
        }
        for r in 0..3 {
            e[9 + r] = x_b[r];
        }
        ParameterVector(e)
    }

    pub fn x_a(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.0[3 * r + c])
    }

    pub fn x_b(&self) -> Vector3<f64> {
        Vector3::new(self.0[9], self.0[10], self.0[11])
    }

    pub fn as_dvector(&self) -> DVector<f64> {
        DVector::from_row_slice(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Stacked 3N x 12 regression matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: DMatrix<f64>,
    n_postures: usize,
}

impl DesignMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.rows
    }

    pub fn n_postures(&self) -> usize {
        self.n_postures
    }

    pub fn n_rows(&self) -> usize {
        3 * self.n_postures
    }
}

/// Motor pulse/angle conversion constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotorConversion {
    pulses_per_rev: f64,
    reduction_ratio: f64,
}

impl MotorConversion {
    pub fn new(pulses_per_rev: f64, reduction_ratio: f64) -> Result<Self> {
        if !(pulses_per_rev > 0.0) || !(reduction_ratio > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pulses_per_rev and reduction_ratio must be positive, got {pulses_per_rev} and {reduction_ratio}"
            )));
        }
        Ok(Self {
            pulses_per_rev,
            reduction_ratio,
        })
    }

    pub fn pulses_per_rev(&self) -> f64 {
        self.pulses_per_rev
    }

    pub fn reduction_ratio(&self) -> f64 {
        self.reduction_ratio
    }
}

/// Result of snapping an angle to the motor's pulse grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseRounding {
    pub pulses: i64,
    /// Angle left over after rounding, in degrees.
    pub residual_degrees: f64,
}

/// Builds the 3x12 regression block for one posture.
///
/// Row r carries the posture transposed in columns `3r..3r+3` and a 1 in the
/// bias column `9 + r`, so that `row_block(u) * X = X_A * u + X_B`.
pub fn row_block(u: &Posture) -> Result<RowBlock> {
    if !u.is_finite() {
        return Err(Error::NonFinite("posture"));
    }
    let mut block = RowBlock::zeros();
    for r in 0..3 {
        block[(r, 3 * r)] = u.pitch;
        block[(r, 3 * r + 1)] = u.yaw;
        block[(r, 3 * r + 2)] = u.roll;
        block[(r, 9 + r)] = 1.0;
    }
    Ok(block)
}

/// Stacks the per-posture regression blocks into the full 3N x 12 design.
pub fn assemble_design(postures: &[Posture]) -> Result<DesignMatrix> {
    if postures.is_empty() {
        return Err(Error::EmptyInput { what: "postures" });
    }
    let mut rows = DMatrix::zeros(3 * postures.len(), PARAM_DIM);
    for (i, u) in postures.iter().enumerate() {
        let block = row_block(u)?;
        rows.view_mut((3 * i, 0), (3, PARAM_DIM)).copy_from(&block);
    }
    Ok(DesignMatrix {
        rows,
        n_postures: postures.len(),
    })
}

fn stack_outputs(outputs: &[MeasuredPosture]) -> DVector<f64> {
    let mut y = DVector::zeros(3 * outputs.len());
    for (i, m) in outputs.iter().enumerate() {
        y[3 * i] = m.pitch;
        y[3 * i + 1] = m.yaw;
        y[3 * i + 2] = m.roll;
    }
    y
}

/// Diagnostics of the design that produced an estimate.
#[derive(Debug, Clone, Copy)]
pub struct DesignDiagnostics {
    /// Numerical rank under [`RANK_TOL_REL`].
    pub rank: usize,
    /// sigma_max / sigma_min of the design matrix.
    pub condition: f64,
}

/// Least-squares identification of the 12 calibration parameters.
///
/// Solves `min ||A X - Y||` through the singular value decomposition of the
/// design rather than the normal equations, and rejects designs whose
/// numerical rank falls below 12.
pub fn identify(postures: &[Posture], outputs: &[MeasuredPosture]) -> Result<ParameterVector> {
    identify_full(postures, outputs).map(|(x, _)| x)
}

/// Like [`identify`], additionally reporting rank and condition diagnostics.
pub fn identify_full(
    postures: &[Posture],
    outputs: &[MeasuredPosture],
) -> Result<(ParameterVector, DesignDiagnostics)> {
    if postures.len() != outputs.len() {
        return Err(Error::LengthMismatch {
            left_name: "postures",
            left: postures.len(),
            right_name: "outputs",
            right: outputs.len(),
        });
    }
    if outputs.iter().any(|m| !m.is_finite()) {
        return Err(Error::NonFinite("outputs"));
    }
    let design = assemble_design(postures)?;
    let y = stack_outputs(outputs);

    let svd = design.rows.clone().svd(true, true);
    let sigma_max = svd.singular_values.max();
    let tol = RANK_TOL_REL * sigma_max;
    let rank = svd.singular_values.iter().filter(|&&s| s > tol).count();
    if rank < PARAM_DIM {
        return Err(Error::RankDeficient {
            rank,
            needed: PARAM_DIM,
        });
    }
    let sigma_min = svd.singular_values.min();
    let condition = sigma_max / sigma_min;

    let solution = svd
        .solve(&y, tol)
        .map_err(|e| Error::Format(format!("svd solve failed: {e}")))?;
    let mut entries = [0.0; PARAM_DIM];
    entries.copy_from_slice(solution.as_slice());
    Ok((ParameterVector(entries), DesignDiagnostics { rank, condition }))
}

/// Forward calibration map: `X_A * u + X_B`.
pub fn predict(x: &ParameterVector, u: &Posture) -> MeasuredPosture {
    let v = x.x_a() * u.as_vector() + x.x_b();
    MeasuredPosture::from_vector(v)
}

/// Inverse calibration map with the default condition cap.
pub fn invert_calibration(x: &ParameterVector, y_desired: &MeasuredPosture) -> Result<Posture> {
    invert_calibration_with_cap(x, y_desired, DEFAULT_COND_CAP)
}

/// Solves `X_A * u = y_desired - X_B` for the input posture `u`.
///
/// Refuses when the condition estimate of `X_A` exceeds `cond_cap`.
pub fn invert_calibration_with_cap(
    x: &ParameterVector,
    y_desired: &MeasuredPosture,
    cond_cap: f64,
) -> Result<Posture> {
    let x_a = x.x_a();
    let svd = x_a.svd(true, true);
    let s_max = svd.singular_values.max();
    let s_min = svd.singular_values.min();
    let cond = if s_min > 0.0 { s_max / s_min } else { f64::INFINITY };
    if !(cond <= cond_cap) {
        return Err(Error::IllConditioned {
            cond,
            cap: cond_cap,
        });
    }
    let rhs = y_desired.as_vector() - x.x_b();
    let u = svd
        .solve(&rhs, 0.0)
        .map_err(|e| Error::Format(format!("svd solve failed: {e}")))?;
    Ok(Posture::from_vector(u))
}

/// Five-number-style summary of signed errors along one axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisSummary {
    pub median: f64,
    pub iqr: f64,
    pub min: f64,
    pub max: f64,
    /// Median of |error|, handy for before/after comparisons.
    pub abs_median: f64,
}

/// Per-axis error summaries, ordered (pitch, yaw, roll).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualStats {
    pub axes: [AxisSummary; 3],
    pub n_samples: usize,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    // Linear interpolation between order statistics (type-7 quantile).
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn summarize_axis(errors: &mut Vec<f64>) -> AxisSummary {
    errors.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    let median = quantile(errors, 0.5);
    let iqr = quantile(errors, 0.75) - quantile(errors, 0.25);
    let min = errors[0];
    let max = errors[errors.len() - 1];
    let mut abs: Vec<f64> = errors.iter().map(|e| e.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).expect("finite errors"));
    let abs_median = quantile(&abs, 0.5);
    AxisSummary {
        median,
        iqr,
        min,
        max,
        abs_median,
    }
}

/// Summarizes input-output errors per axis.
///
/// With `x = None` the error is the raw discrepancy `y - u`; with an
/// identified parameter vector it is the post-calibration residual
/// `y - predict(x, u)`.
pub fn residual_stats(
    postures: &[Posture],
    outputs: &[MeasuredPosture],
    x: Option<&ParameterVector>,
) -> Result<ResidualStats> {
    if postures.len() != outputs.len() {
        return Err(Error::LengthMismatch {
            left_name: "postures",
            left: postures.len(),
            right_name: "outputs",
            right: outputs.len(),
        });
    }
    if postures.is_empty() {
        return Err(Error::EmptyInput { what: "postures" });
    }
    let mut per_axis: [Vec<f64>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (u, y) in postures.iter().zip(outputs) {
        let reference = match x {
            Some(params) => predict(params, u).as_vector(),
            None => u.as_vector(),
        };
        let e = y.as_vector() - reference;
        for axis in 0..3 {
            per_axis[axis].push(e[axis]);
        }
    }
    let axes = [
        summarize_axis(&mut per_axis[0]),
        summarize_axis(&mut per_axis[1]),
        summarize_axis(&mut per_axis[2]),
    ];
    Ok(ResidualStats {
        axes,
        n_samples: postures.len(),
    })
}

/// Converts a signed motor pulse count to an output angle in degrees.
pub fn pulse_to_angle(pulses: i64, conv: &MotorConversion) -> f64 {
    360.0 * pulses as f64 / (conv.pulses_per_rev * conv.reduction_ratio)
}

/// Converts an angle in degrees to the nearest integer pulse count.
///
/// Ties round away from zero; the rounding residual is reported so callers
/// can track quantization error.
pub fn angle_to_pulse(angle_degrees: f64, conv: &MotorConversion) -> PulseRounding {
    let exact = angle_degrees * conv.pulses_per_rev * conv.reduction_ratio / 360.0;
    let pulses = exact.round() as i64;
    PulseRounding {
        pulses,
        residual_degrees: angle_degrees - pulse_to_angle(pulses, conv),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_posture(rng: &mut ChaCha8Rng) -> Posture {
        Posture::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        )
    }

    fn random_params(rng: &mut ChaCha8Rng) -> ParameterVector {
        let mut e = [0.0; PARAM_DIM];
        for v in &mut e {
            *v = rng.random_range(-2.0..2.0);
        }
        ParameterVector(e)
    }

    /// Independent Kronecker-product oracle: (I3 (x) u^T) vec(X_A) + X_B,
    /// with the Kronecker product expanded element by element.
    fn kron_predict(x: &ParameterVector, u: &Posture) -> Vector3<f64> {
        let uvec = [u.pitch, u.yaw, u.roll];
        // I3 (x) u^T is 3x9: entry (i, 3i + j) = u[j].
        let mut kron = [[0.0; 9]; 3];
        for i in 0..3 {
            for j in 0..3 {
                kron[i][3 * i + j] = uvec[j];
            }
        }
        let mut out = Vector3::zeros();
        for i in 0..3 {
            for j in 0..9 {
                out[i] += kron[i][j] * x.0[j];
            }
            out[i] += x.0[9 + i];
        }
        out
    }

    #[test]
    fn row_block_zero_input_has_only_bias_ones() {
        let block = row_block(&Posture::new(0.0, 0.0, 0.0)).unwrap();
        let mut expected = RowBlock::zeros();
        expected[(0, 9)] = 1.0;
        expected[(1, 10)] = 1.0;
        expected[(2, 11)] = 1.0;
        assert_eq!(block, expected);
    }

    #[test]
    fn row_block_unit_pitch_input() {
        let block = row_block(&Posture::new(1.0, 0.0, 0.0)).unwrap();
        assert_eq!(block[(0, 0)], 1.0);
        assert_eq!(block[(1, 3)], 1.0);
        assert_eq!(block[(2, 6)], 1.0);
        assert_eq!(block[(0, 9)], 1.0);
        // Exactly six nonzeros: three pose entries, three bias ones.
        let nonzeros = block.iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzeros, 6);
    }

    #[test]
    fn row_block_rejects_non_finite() {
        assert!(row_block(&Posture::new(f64::NAN, 0.0, 0.0)).is_err());
        assert!(row_block(&Posture::new(0.0, f64::INFINITY, 0.0)).is_err());
    }

    #[test]
    fn row_block_matches_kronecker_oracle() {
        let mut rng = rng(11);
        for _ in 0..200 {
            let u = random_posture(&mut rng);
            let x = random_params(&mut rng);
            let via_block = row_block(&u).unwrap() * x.as_dvector();
            let via_kron = kron_predict(&x, &u);
            for i in 0..3 {
                assert_relative_eq!(via_block[i], via_kron[i], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn assemble_single_posture_equals_row_block() {
        let u = Posture::new(0.3, -0.7, 0.2);
        let design = assemble_design(&[u]).unwrap();
        assert_eq!(design.n_rows(), 3);
        let block = row_block(&u).unwrap();
        for r in 0..3 {
            for c in 0..PARAM_DIM {
                assert_eq!(design.matrix()[(r, c)], block[(r, c)]);
            }
        }
    }

    #[test]
    fn assemble_four_postures_is_square() {
        let mut rng = rng(12);
        let postures: Vec<Posture> = (0..4).map(|_| random_posture(&mut rng)).collect();
        let design = assemble_design(&postures).unwrap();
        assert_eq!(design.matrix().nrows(), 12);
        assert_eq!(design.matrix().ncols(), 12);
    }

    #[test]
    fn assemble_rejects_empty() {
        assert!(assemble_design(&[]).is_err());
    }

    #[test]
    fn repeated_postures_have_rank_three() {
        let u = Posture::new(0.4, 0.1, -0.3);
        let design = assemble_design(&[u, u, u, u]).unwrap();
        let rank = design.matrix().clone().rank(1e-10);
        assert_eq!(rank, 3);
    }

    #[test]
    fn identify_recovers_identity_plant() {
        let mut rng = rng(13);
        let postures: Vec<Posture> = (0..4).map(|_| random_posture(&mut rng)).collect();
        let truth = ParameterVector::identity();
        let outputs: Vec<MeasuredPosture> = postures.iter().map(|u| predict(&truth, u)).collect();
        let x = identify(&postures, &outputs).unwrap();
        for (got, want) in x.0.iter().zip(truth.0.iter()) {
            assert_relative_eq!(got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn identify_recovers_diagonal_reference_plant() {
        // Diagonal scaling (pitch, yaw, roll) = (0.43, 0.71, 0.87) with
        // biases (3.1, -5.8, 2.41).
        let x_a = Matrix3::from_diagonal(&Vector3::new(0.43, 0.71, 0.87));
        let x_b = Vector3::new(3.1, -5.8, 2.41);
        let truth = ParameterVector::from_parts(&x_a, &x_b);
        let mut rng = rng(14);
        let postures: Vec<Posture> = (0..50).map(|_| random_posture(&mut rng)).collect();
        let outputs: Vec<MeasuredPosture> = postures.iter().map(|u| predict(&truth, u)).collect();
        let x = identify(&postures, &outputs).unwrap();
        assert_relative_eq!(x.0[0], 0.43, epsilon = 1e-10);
        assert_relative_eq!(x.0[4], 0.71, epsilon = 1e-10);
        assert_relative_eq!(x.0[8], 0.87, epsilon = 1e-10);
        assert_relative_eq!(x.0[9], 3.1, epsilon = 1e-10);
        assert_relative_eq!(x.0[10], -5.8, epsilon = 1e-10);
        assert_relative_eq!(x.0[11], 2.41, epsilon = 1e-10);
        // Off-diagonal couplings come back as zero.
        for idx in [1, 2, 3, 5, 6, 7] {
            assert!(x.0[idx].abs() < 1e-10);
        }
    }

    #[test]
    fn identify_rejects_underdetermined() {
        let mut rng = rng(15);
        let postures: Vec<Posture> = (0..3).map(|_| random_posture(&mut rng)).collect();
        let outputs: Vec<MeasuredPosture> = postures
            .iter()
            .map(|u| MeasuredPosture::new(u.pitch, u.yaw, u.roll))
            .collect();
        match identify(&postures, &outputs) {
            Err(Error::RankDeficient { rank, needed }) => {
                assert!(rank < needed);
                assert_eq!(needed, PARAM_DIM);
            }
            other => panic!("expected rank error, got {other:?}"),
        }
    }

    #[test]
    fn identify_mean_converges_under_noise() {
        // Zero-mean Gaussian noise: the mean of the identified parameters
        // over 100 seeds stays within 3 sigma / sqrt(100 N) of the truth.
        let x_a = Matrix3::from_diagonal(&Vector3::new(0.43, 0.71, 0.87));
        let x_b = Vector3::new(3.1, -5.8, 2.41);
        let truth = ParameterVector::from_parts(&x_a, &x_b);
        let sigma = 0.05;
        let n = 50;
        let mut rng = rng(25);
        let postures: Vec<Posture> = (0..n)
            .map(|_| {
                Posture::new(
                    rng.random_range(-30.0..30.0),
                    rng.random_range(-25.0..25.0),
                    rng.random_range(-30.0..30.0),
                )
            })
            .collect();
        let seeds = 100;
        let mut sums = [0.0; PARAM_DIM];
        for _ in 0..seeds {
            let outputs: Vec<MeasuredPosture> = postures
                .iter()
                .map(|u| {
                    let mut y = predict(&truth, u).as_vector();
                    for i in 0..3 {
                        // Box-Muller keeps this oracle independent of the
                        // simulator's noise path.
                        let u1: f64 = rng.random_range(1e-12..1.0);
                        let u2: f64 = rng.random_range(0.0..1.0);
                        y[i] += sigma
                            * (-2.0 * u1.ln()).sqrt()
                            * (2.0 * std::f64::consts::PI * u2).cos();
                    }
                    MeasuredPosture::from_vector(y)
                })
                .collect();
            let x = identify(&postures, &outputs).unwrap();
            for (acc, v) in sums.iter_mut().zip(x.0.iter()) {
                *acc += v;
            }
        }
        let bound = 3.0 * sigma / ((seeds * n) as f64).sqrt();
        for p in 0..PARAM_DIM {
            let bias = (sums[p] / seeds as f64 - truth.0[p]).abs();
            assert!(bias < bound, "parameter {p}: bias {bias:.3e} vs {bound:.3e}");
        }
    }

    #[test]
    fn identify_rejects_length_mismatch() {
        let postures = vec![Posture::new(0.0, 0.0, 0.0); 4];
        let outputs = vec![MeasuredPosture::new(0.0, 0.0, 0.0); 3];
        assert!(matches!(
            identify(&postures, &outputs),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn identify_matches_normal_equation_oracle() {
        // The closed-form (A^T A)^-1 A^T y estimate, kept as an independent
        // route to the same solution.
        let mut rng = rng(16);
        let truth = random_params(&mut rng);
        let postures: Vec<Posture> = (0..10).map(|_| random_posture(&mut rng)).collect();
        let outputs: Vec<MeasuredPosture> = postures
            .iter()
            .map(|u| {
                let mut y = predict(&truth, u).as_vector();
                for i in 0..3 {
                    y[i] += rng.random_range(-0.01..0.01);
                }
                MeasuredPosture::from_vector(y)
            })
            .collect();
        let x = identify(&postures, &outputs).unwrap();

        let a = assemble_design(&postures).unwrap();
        let y = stack_outputs(&outputs);
        let ata = a.matrix().transpose() * a.matrix();
        let aty = a.matrix().transpose() * y;
        let normal = ata.try_inverse().unwrap() * aty;
        for i in 0..PARAM_DIM {
            assert_relative_eq!(x.0[i], normal[i], epsilon = 1e-9);
        }
    }

    #[test]
    fn predict_identity_map() {
        let y = predict(&ParameterVector::identity(), &Posture::new(5.0, -3.0, 2.0));
        assert_eq!(y, MeasuredPosture::new(5.0, -3.0, 2.0));
    }

    #[test]
    fn predict_bias_only() {
        let mut e = [0.0; PARAM_DIM];
        e[11] = -5.8; // roll-axis bias only
        let y = predict(&ParameterVector(e), &Posture::new(0.0, 0.0, 0.0));
        assert_eq!(y, MeasuredPosture::new(0.0, 0.0, -5.8));
    }

    #[test]
    fn predict_matches_row_block() {
        let mut rng = rng(17);
        for _ in 0..100 {
            let x = random_params(&mut rng);
            let u = random_posture(&mut rng);
            let via_block = row_block(&u).unwrap() * x.as_dvector();
            let y = predict(&x, &u);
            assert_relative_eq!(y.pitch, via_block[0], epsilon = 1e-13);
            assert_relative_eq!(y.yaw, via_block[1], epsilon = 1e-13);
            assert_relative_eq!(y.roll, via_block[2], epsilon = 1e-13);
        }
    }

    #[test]
    fn predict_is_affine_linear() {
        let mut rng = rng(18);
        for _ in 0..50 {
            let x = random_params(&mut rng);
            let u1 = random_posture(&mut rng);
            let u2 = random_posture(&mut rng);
            let alpha: f64 = rng.random_range(-2.0..2.0);
            let beta: f64 = rng.random_range(-2.0..2.0);
            let mixed = Posture::from_vector(alpha * u1.as_vector() + beta * u2.as_vector());
            let lhs = predict(&x, &mixed).as_vector();
            let rhs = alpha * predict(&x, &u1).as_vector() + beta * predict(&x, &u2).as_vector()
                - (alpha + beta - 1.0) * x.x_b();
            for i in 0..3 {
                assert_relative_eq!(lhs[i], rhs[i], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn invert_identity() {
        let u = invert_calibration(
            &ParameterVector::identity(),
            &MeasuredPosture::new(1.0, 2.0, 3.0),
        )
        .unwrap();
        assert_relative_eq!(u.pitch, 1.0, epsilon = 1e-12);
        assert_relative_eq!(u.yaw, 2.0, epsilon = 1e-12);
        assert_relative_eq!(u.roll, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn invert_bias_only_target() {
        let x_a = Matrix3::from_diagonal(&Vector3::new(0.43, 0.71, 0.87));
        let x_b = Vector3::new(3.1, -5.8, 2.41);
        let x = ParameterVector::from_parts(&x_a, &x_b);
        let u = invert_calibration(&x, &MeasuredPosture::new(3.1, -5.8, 2.41)).unwrap();
        assert_relative_eq!(u.pitch, 0.0, epsilon = 1e-12);
        assert_relative_eq!(u.yaw, 0.0, epsilon = 1e-12);
        assert_relative_eq!(u.roll, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn invert_round_trips_through_predict() {
        let mut rng = rng(19);
        let mut checked = 0;
        while checked < 100 {
            let x = random_params(&mut rng);
            if x.x_a().determinant().abs() < 0.05 {
                continue; // skip nearly singular draws
            }
            let y = MeasuredPosture::new(
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
                rng.random_range(-5.0..5.0),
            );
            let u = invert_calibration(&x, &y).unwrap();
            let back = predict(&x, &u);
            assert_relative_eq!(back.pitch, y.pitch, epsilon = 1e-9);
            assert_relative_eq!(back.yaw, y.yaw, epsilon = 1e-9);
            assert_relative_eq!(back.roll, y.roll, epsilon = 1e-9);
            checked += 1;
        }
    }

    #[test]
    fn invert_rejects_singular() {
        let x_a = Matrix3::from_diagonal(&Vector3::new(1.0, 0.0, 1.0));
        let x = ParameterVector::from_parts(&x_a, &Vector3::zeros());
        match invert_calibration(&x, &MeasuredPosture::new(1.0, 1.0, 1.0)) {
            Err(Error::IllConditioned { cond, .. }) => assert!(cond.is_infinite()),
            other => panic!("expected conditioning error, got {other:?}"),
        }
    }

    #[test]
    fn residual_stats_perfect_calibration() {
        let mut rng = rng(20);
        let truth = random_params(&mut rng);
        let postures: Vec<Posture> = (0..40).map(|_| random_posture(&mut rng)).collect();
        let outputs: Vec<MeasuredPosture> = postures.iter().map(|u| predict(&truth, u)).collect();
        let stats = residual_stats(&postures, &outputs, Some(&truth)).unwrap();
        for axis in stats.axes {
            assert!(axis.median.abs() < 1e-12);
            assert!(axis.iqr.abs() < 1e-12);
        }
    }

    #[test]
    fn residual_stats_uncalibrated_yaw_dominates_on_unit_range() {
        // Reference plant over normalized [0,1] inputs: the yaw axis (scale
        // 0.71, bias -5.8) sits farthest from zero error.
        let x_a = Matrix3::from_diagonal(&Vector3::new(0.43, 0.71, 0.87));
        let x_b = Vector3::new(3.1, -5.8, 2.41);
        let truth = ParameterVector::from_parts(&x_a, &x_b);
        let mut rng = rng(21);
        let postures: Vec<Posture> = (0..2000)
            .map(|_| {
                Posture::new(
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                    rng.random_range(0.0..1.0),
                )
            })
            .collect();
        let outputs: Vec<MeasuredPosture> = postures.iter().map(|u| predict(&truth, u)).collect();
        let stats = residual_stats(&postures, &outputs, None).unwrap();
        let spread = |a: &AxisSummary| a.min.abs().max(a.max.abs());
        assert!(stats.axes[1].abs_median > stats.axes[0].abs_median);
        assert!(stats.axes[1].abs_median > stats.axes[2].abs_median);
        assert!(spread(&stats.axes[1]) > spread(&stats.axes[0]));
        assert!(spread(&stats.axes[1]) > spread(&stats.axes[2]));
        // Analytic check on the yaw error: e = (0.71 - 1) u - 5.8.
        assert!(stats.axes[1].min >= -0.29 - 5.8 - 1e-9);
        assert!(stats.axes[1].max <= -5.8 + 1e-9);
    }

    #[test]
    fn residual_stats_rejects_mismatch() {
        let postures = vec![Posture::new(0.0, 0.0, 0.0); 2];
        let outputs = vec![MeasuredPosture::new(0.0, 0.0, 0.0); 3];
        assert!(residual_stats(&postures, &outputs, None).is_err());
    }

    #[test]
    fn pulse_to_angle_direct_values() {
        let conv = MotorConversion::new(1600.0, 10.0).unwrap();
        assert_eq!(pulse_to_angle(0, &conv), 0.0);
        assert_relative_eq!(pulse_to_angle(1600, &conv), 36.0, epsilon = 1e-12);
        assert_relative_eq!(pulse_to_angle(-1600, &conv), -36.0, epsilon = 1e-12);
    }

    #[test]
    fn pulse_round_trip_over_full_range() {
        let conv = MotorConversion::new(1600.0, 10.0).unwrap();
        for p in (-1_000_000..=1_000_000).step_by(997) {
            let angle = pulse_to_angle(p, &conv);
            let back = angle_to_pulse(angle, &conv);
            assert_eq!(back.pulses, p);
            assert!(back.residual_degrees.abs() < 1e-9);
        }
        // Dense sweep near zero where rounding is most delicate.
        for p in -2000..=2000 {
            let back = angle_to_pulse(pulse_to_angle(p, &conv), &conv);
            assert_eq!(back.pulses, p);
        }
    }

    #[test]
    fn angle_to_pulse_rounds_ties_away_from_zero() {
        // 1 pulse = 0.0225 deg for (1600, 10); half a pulse is 0.01125 deg.
        let conv = MotorConversion::new(1600.0, 10.0).unwrap();
        let half = 0.01125;
        assert_eq!(angle_to_pulse(half, &conv).pulses, 1);
        assert_eq!(angle_to_pulse(-half, &conv).pulses, -1);
        let r = angle_to_pulse(half, &conv);
        assert_relative_eq!(r.residual_degrees, -half, epsilon = 1e-12);
    }

    #[test]
    fn motor_conversion_rejects_non_positive() {
        assert!(MotorConversion::new(0.0, 10.0).is_err());
        assert!(MotorConversion::new(1600.0, -1.0).is_err());
    }
}
