//! Simulated plant and dataset generation.
//!
//! Candidate postures are drawn uniformly inside per-axis bounds; outputs
//! come from a ground-truth linear plant plus additive Gaussian noise. Every
//! episode owns an RNG stream derived from `(seed, episode_id)`, so episodes
//! regenerate independently, in any order, and bit-identically.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::calib::{MeasuredPosture, Posture};
use crate::error::{Error, Result};

pub const DATASET_FORMAT_VERSION: u32 = 1;

const STREAM_INPUT: u64 = 0x494e5055;
const STREAM_NOISE: u64 = 0x4e4f4953;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic RNG for one `(seed, episode, purpose)` stream.
pub fn stream_rng(seed: u64, episode_id: u64, purpose: u64) -> ChaCha8Rng {
    let mixed = splitmix64(splitmix64(splitmix64(seed) ^ purpose) ^ episode_id);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Ground-truth plant: scaling/coupling matrix, bias, and per-axis noise.
///
/// Axis order is (pitch, yaw, roll) throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantTruth {
    pub x_a: [[f64; 3]; 3],
    pub x_b: [f64; 3],
    pub noise_sigma: [f64; 3],
}

impl PlantTruth {
    pub fn new(x_a: Matrix3<f64>, x_b: Vector3<f64>, noise_sigma: [f64; 3]) -> Result<Self> {
        if noise_sigma.iter().any(|s| !(*s >= 0.0)) {
            return Err(Error::InvalidArgument(format!(
                "noise_sigma must be non-negative, got {noise_sigma:?}"
            )));
        }
        let mut rows = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                rows[r][c] = x_a[(r, c)];
            }
        }
        Ok(Self {
            x_a: rows,
            x_b: [x_b.x, x_b.y, x_b.z],
            noise_sigma,
        })
    }

    /// Diagonal plant without cross-coupling.
    pub fn diagonal(scale: [f64; 3], bias: [f64; 3], noise_sigma: [f64; 3]) -> Result<Self> {
        Self::new(
            Matrix3::from_diagonal(&Vector3::new(scale[0], scale[1], scale[2])),
            Vector3::new(bias[0], bias[1], bias[2]),
            noise_sigma,
        )
    }

    /// Built-in demonstration plant: per-axis scalings (0.43, 0.71, 0.87)
    /// and biases (3.1, -5.8, 2.41) in (pitch, yaw, roll) order, with a
    /// small default measurement noise.
    pub fn reference() -> Self {
        Self::diagonal([0.43, 0.71, 0.87], [3.1, -5.8, 2.41], [0.01; 3])
            .expect("reference plant is valid")
    }

    pub fn with_noise(mut self, noise_sigma: [f64; 3]) -> Self {
        self.noise_sigma = noise_sigma;
        self
    }

    pub fn x_a_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|r, c| self.x_a[r][c])
    }

    pub fn x_b_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x_b[0], self.x_b[1], self.x_b[2])
    }

    /// True parameter vector of this plant.
    pub fn parameters(&self) -> crate::calib::ParameterVector {
        crate::calib::ParameterVector::from_parts(&self.x_a_matrix(), &self.x_b_vector())
    }

    /// Hex digest identifying the plant in dataset headers.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("plant serializes");
        let hash = Sha256::digest(&json);
        hash.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Per-axis closed sampling intervals, ordered (pitch, yaw, roll).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisBounds(pub [[f64; 2]; 3]);

impl AxisBounds {
    /// Normalized unit cube, the default for selection and training data.
    pub fn normalized() -> Self {
        AxisBounds([[0.0, 1.0]; 3])
    }

    /// Physical ranges in degrees: +/-30 pitch and roll, +/-25 yaw.
    pub fn physical_degrees() -> Self {
        AxisBounds([[-30.0, 30.0], [-25.0, 25.0], [-30.0, 30.0]])
    }

    pub fn validate(&self) -> Result<()> {
        for (axis, b) in self.0.iter().enumerate() {
            if !(b[0] < b[1]) || !b[0].is_finite() || !b[1].is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "degenerate bounds {b:?} on axis {axis}"
                )));
            }
        }
        Ok(())
    }

    /// True when every axis interval lies inside [0, 1].
    pub fn is_normalized(&self) -> bool {
        self.0.iter().all(|b| b[0] >= 0.0 && b[1] <= 1.0)
    }
}

/// Shape and seeding of a generated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub n_episodes: u64,
    pub m_per_episode: usize,
    pub bounds: AxisBounds,
    pub seed: u64,
    pub with_outputs: bool,
}

impl DatasetSpec {
    pub fn new(
        n_episodes: u64,
        m_per_episode: usize,
        bounds: AxisBounds,
        seed: u64,
        with_outputs: bool,
    ) -> Result<Self> {
        let spec = Self {
            n_episodes,
            m_per_episode,
            bounds,
            seed,
            with_outputs,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_episodes < 1 {
            return Err(Error::InvalidArgument("n_episodes must be >= 1".into()));
        }
        if self.m_per_episode < 4 {
            return Err(Error::InvalidArgument(
                "m_per_episode must be >= 4".into(),
            ));
        }
        self.bounds.validate()
    }
}

/// One candidate set, optionally with simulated measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeData {
    pub episode_id: u64,
    pub normalized: bool,
    pub inputs: Vec<Posture>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<Vec<MeasuredPosture>>,
}

/// First line of every dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format_version: u32,
    pub spec: DatasetSpec,
    pub plant_digest: Option<String>,
}

/// An in-memory dataset: header plus episodes in id order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub episodes: Vec<EpisodeData>,
}

/// Draws `m` uniform postures from the `(seed, episode_id)` input stream.
pub fn sample_uniform_postures(
    bounds: &AxisBounds,
    m: usize,
    seed: u64,
    episode_id: u64,
) -> Result<Vec<Posture>> {
    bounds.validate()?;
    let mut rng = stream_rng(seed, episode_id, STREAM_INPUT);
    let b = bounds.0;
    Ok((0..m)
        .map(|_| {
            Posture::new(
                rng.random_range(b[0][0]..b[0][1]),
                rng.random_range(b[1][0]..b[1][1]),
                rng.random_range(b[2][0]..b[2][1]),
            )
        })
        .collect())
}

/// Samples the M candidate postures of one episode.
pub fn generate_candidates(spec: &DatasetSpec, episode_id: u64) -> Result<Vec<Posture>> {
    spec.validate()?;
    sample_uniform_postures(&spec.bounds, spec.m_per_episode, spec.seed, episode_id)
}

/// One noisy measurement of the plant response at `u`.
pub fn simulate_measure<R: Rng>(plant: &PlantTruth, u: &Posture, rng: &mut R) -> MeasuredPosture {
    let mut y = plant.x_a_matrix() * u.as_vector() + plant.x_b_vector();
    for axis in 0..3 {
        let sigma = plant.noise_sigma[axis];
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("sigma validated");
            y[axis] += normal.sample(rng);
        }
    }
    MeasuredPosture::from_vector(y)
}

/// Builds one full episode (inputs, and outputs when the spec asks for them).
pub fn simulate_episode(
    spec: &DatasetSpec,
    plant: Option<&PlantTruth>,
    episode_id: u64,
) -> Result<EpisodeData> {
    let inputs = generate_candidates(spec, episode_id)?;
    let outputs = if spec.with_outputs {
        let plant = plant.ok_or_else(|| {
            Error::InvalidArgument("with_outputs requires a plant truth".into())
        })?;
        let mut noise = stream_rng(spec.seed, episode_id, STREAM_NOISE);
        Some(
            inputs
                .iter()
                .map(|u| simulate_measure(plant, u, &mut noise))
                .collect(),
        )
    } else {
        None
    };
    Ok(EpisodeData {
        episode_id,
        normalized: spec.bounds.is_normalized(),
        inputs,
        outputs,
    })
}

/// Generates the whole dataset in memory.
pub fn build_dataset(spec: &DatasetSpec, plant: Option<&PlantTruth>) -> Result<Dataset> {
    build_dataset_threaded(spec, plant, 1)
}

/// Like [`build_dataset`], generating episodes on `threads` workers. The
/// result is identical for any thread count because each episode owns its
/// RNG streams.
pub fn build_dataset_threaded(
    spec: &DatasetSpec,
    plant: Option<&PlantTruth>,
    threads: usize,
) -> Result<Dataset> {
    spec.validate()?;
    if spec.with_outputs && plant.is_none() {
        return Err(Error::InvalidArgument(
            "with_outputs requires a plant truth".into(),
        ));
    }
    let ids: Vec<u64> = (0..spec.n_episodes).collect();
    let episodes: Result<Vec<EpisodeData>> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| {
            use rayon::prelude::*;
            ids.par_iter()
                .map(|&id| simulate_episode(spec, plant, id))
                .collect()
        })
    } else {
        ids.iter()
            .map(|&id| simulate_episode(spec, plant, id))
            .collect()
    };
    Ok(Dataset {
        header: DatasetHeader {
            format_version: DATASET_FORMAT_VERSION,
            spec: *spec,
            plant_digest: plant.map(PlantTruth::digest),
        },
        episodes: episodes?,
    })
}

/// Writes a dataset as JSON lines: one header line, one line per episode.
pub fn write_dataset(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let header = serde_json::to_string(&dataset.header)
        .map_err(|e| Error::Format(format!("header: {e}")))?;
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for ep in &dataset.episodes {
        let line =
            serde_json::to_string(ep).map_err(|e| Error::Format(format!("episode: {e}")))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Generates and writes a dataset in one go.
pub fn make_dataset(
    spec: &DatasetSpec,
    plant: Option<&PlantTruth>,
    path: &Path,
    threads: usize,
) -> Result<Dataset> {
    let dataset = build_dataset_threaded(spec, plant, threads)?;
    write_dataset(&dataset, path)?;
    Ok(dataset)
}

/// Reads a dataset file written by [`write_dataset`].
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::Format("dataset file is empty".into()))?
        .map_err(|e| Error::io(path, e))?;
    let header: DatasetHeader = serde_json::from_str(&header_line)
        .map_err(|e| Error::Format(format!("bad dataset header: {e}")))?;
    if header.format_version != DATASET_FORMAT_VERSION {
        return Err(Error::Format(format!(
            "unsupported dataset format version {}",
            header.format_version
        )));
    }
    let mut episodes = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ep: EpisodeData = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("bad episode record: {e}")))?;
        episodes.push(ep);
    }
    Ok(Dataset { header, episodes })
}

/// Flat CSV export for plotting tools.
pub fn export_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let with_outputs = dataset.episodes.iter().any(|e| e.outputs.is_some());
    let header = if with_outputs {
        "episode_id,index,u_pitch,u_yaw,u_roll,y_pitch,y_yaw,y_roll"
    } else {
        "episode_id,index,u_pitch,u_yaw,u_roll"
    };
    writeln!(w, "{header}").map_err(|e| Error::io(path, e))?;
    for ep in &dataset.episodes {
        for (i, u) in ep.inputs.iter().enumerate() {
            write!(
                w,
                "{},{},{},{},{}",
                ep.episode_id, i, u.pitch, u.yaw, u.roll
            )
            .map_err(|e| Error::io(path, e))?;
            if with_outputs {
                match ep.outputs.as_ref().and_then(|o| o.get(i)) {
                    Some(y) => writeln!(w, ",{},{},{}", y.pitch, y.yaw, y.roll)
                        .map_err(|e| Error::io(path, e))?,
                    None => writeln!(w, ",,,").map_err(|e| Error::io(path, e))?,
                }
            } else {
                writeln!(w).map_err(|e| Error::io(path, e))?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
