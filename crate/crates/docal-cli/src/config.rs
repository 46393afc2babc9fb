//! Run configuration: preset defaults, optional JSON config file, and
//! command-line flag overrides, resolved in that order.

use std::fs;
use std::path::{Path, PathBuf};

use docal::rl::{StatsSource, TrainConfig};
use docal::sim::{AxisBounds, DatasetSpec, PlantTruth};
use docal::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    Paper,
    Desk,
}

/// Optional JSON config document; every field can be omitted.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plant: Option<PlantSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<DatasetSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub select: Option<SelectSection>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_a: Option<[[f64; 3]; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_b: Option<[f64; 3]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub episodes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_per_episode: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<BoundsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub with_outputs: Option<bool>,
}

/// Bounds as either a named preset or explicit per-axis intervals.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BoundsSpec {
    Named(String),
    Explicit([[f64; 2]; 3]),
}

impl BoundsSpec {
    pub fn resolve(&self) -> Result<AxisBounds> {
        match self {
            BoundsSpec::Named(name) => match name.as_str() {
                "normalized" => Ok(AxisBounds::normalized()),
                "degrees" => Ok(AxisBounds::physical_degrees()),
                other => Err(Error::InvalidArgument(format!(
                    "unknown bounds preset '{other}' (expected normalized|degrees)"
                ))),
            },
            BoundsSpec::Explicit(b) => {
                let bounds = AxisBounds(*b);
                bounds.validate()?;
                Ok(bounds)
            }
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_episodes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update_every_episodes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs_per_update: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_coef: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_coef: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discount: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden_dim: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward_scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stats_source: Option<StatsSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_candidates: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_select: Option<usize>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
}

/// Fully resolved configuration, echoed into every output directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub preset: String,
    pub plant: PlantTruth,
    pub dataset: DatasetSpec,
    pub train: TrainConfig,
    pub select_k: usize,
    pub random_repeats: usize,
    pub threads: usize,
}

/// Shared flags accepted by every command.
#[derive(Debug, Clone, clap::Args)]
pub struct CommonArgs {
    /// JSON config file; flags override its fields.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Preset defaults to start from.
    #[arg(long, value_enum, global = true)]
    pub preset: Option<Preset>,
    /// Seed for all derived random streams.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallelizable stages (1 = bit-deterministic).
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
}

pub fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Format(format!("config {}: {e}", p.display())))
        }
    }
}

impl RunConfig {
    /// Resolves preset defaults, then file fields, then flag overrides.
    pub fn resolve(common: &CommonArgs, file: &FileConfig) -> Result<RunConfig> {
        let preset = match (&common.preset, &file.preset) {
            (Some(Preset::Paper), _) => Preset::Paper,
            (Some(Preset::Desk), _) => Preset::Desk,
            (None, Some(name)) => match name.as_str() {
                "paper" => Preset::Paper,
                "desk" => Preset::Desk,
                other => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown preset '{other}' in config file"
                    )))
                }
            },
            (None, None) => Preset::Desk,
        };
        let seed = common.seed;

        let mut train = match preset {
            Preset::Paper => TrainConfig::paper(seed.unwrap_or(0)),
            Preset::Desk => TrainConfig::desk(seed.unwrap_or(0)),
        };
        if let Some(t) = &file.train {
            if let Some(v) = t.total_episodes {
                train.total_episodes = v;
            }
            if let Some(v) = t.update_every_episodes {
                train.update_every_episodes = v;
            }
            if let Some(v) = t.epochs_per_update {
                train.epochs_per_update = v;
            }
            if let Some(v) = t.clip_ratio {
                train.clip_ratio = v;
            }
            if let Some(v) = t.entropy_coef {
                train.entropy_coef = v;
            }
            if let Some(v) = t.value_coef {
                train.value_coef = v;
            }
            if let Some(v) = t.learning_rate {
                train.learning_rate = v;
            }
            if let Some(v) = t.discount {
                train.discount = v;
            }
            if let Some(v) = t.hidden_dim {
                train.hidden_dim = v;
            }
            if let Some(v) = t.reward_scale {
                train.reward_scale = v;
            }
            if let Some(v) = t.stats_source {
                train.stats_source = v;
            }
            if let Some(v) = t.m_candidates {
                train.m_candidates = v;
            }
            if let Some(v) = t.k_select {
                train.k_select = v;
            }
        }
        if let Some(s) = seed {
            train.seed = s;
        }

        let mut plant = PlantTruth::reference();
        if let Some(p) = &file.plant {
            let x_a = p.x_a.unwrap_or(plant.x_a);
            let x_b = p.x_b.unwrap_or(plant.x_b);
            let sigma = p.noise_sigma.unwrap_or(plant.noise_sigma);
            plant = PlantTruth {
                x_a,
                x_b,
                noise_sigma: sigma,
            };
            if sigma.iter().any(|s| !(*s >= 0.0)) {
                return Err(Error::InvalidArgument(
                    "plant noise_sigma must be non-negative".into(),
                ));
            }
        }

        let d = file.dataset.clone().unwrap_or_default();
        let bounds = match &d.bounds {
            Some(b) => b.resolve()?,
            None => AxisBounds::normalized(),
        };
        let dataset = DatasetSpec {
            n_episodes: d.episodes.unwrap_or(100),
            m_per_episode: d.m_per_episode.unwrap_or(50),
            bounds,
            seed: seed.or(d.seed).unwrap_or(train.seed),
            with_outputs: d.with_outputs.unwrap_or(false),
        };

        let s = file.select.clone().unwrap_or_default();
        Ok(RunConfig {
            preset: match preset {
                Preset::Paper => "paper".into(),
                Preset::Desk => "desk".into(),
            },
            plant,
            dataset,
            train,
            select_k: s.k.unwrap_or(4),
            random_repeats: s.repeats.unwrap_or(100),
            threads: common.threads,
        })
    }

    /// Writes the resolved config into the output directory for provenance.
    pub fn echo(&self, out_dir: &Path) -> Result<()> {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let path = out_dir.join("effective_config.json");
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Format(format!("config: {e}")))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))
    }
}
