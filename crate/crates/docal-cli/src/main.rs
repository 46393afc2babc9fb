//! Command-line front-end: dataset generation, policy training, posture
//! selection, parameter identification, and evaluation reports, all as pure
//! functions of (config file + flags + input files).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use docal::ErrorCategory;

use commands::{ParamsSource, StrategyArg};
use config::{load_file_config, CommonArgs, RunConfig};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_IDENTIFIABILITY: u8 = 4;
const EXIT_IO: u8 = 5;

#[derive(Parser)]
#[command(name = "docal", version, about = "D-optimal posture selection and plant calibration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a simulated dataset.
    Gen {
        /// Number of episodes.
        #[arg(long)]
        episodes: Option<u64>,
        /// Postures per episode.
        #[arg(long)]
        postures: Option<usize>,
        /// Also simulate measured outputs.
        #[arg(long)]
        with_outputs: bool,
        /// Bounds preset: normalized | degrees.
        #[arg(long)]
        bounds: Option<String>,
    },
    /// Train the selection policy.
    Train {
        /// Override the total episode budget.
        #[arg(long)]
        episodes: Option<u64>,
        /// Override the hidden width.
        #[arg(long)]
        hidden: Option<usize>,
    },
    /// Select postures from every episode of a dataset.
    Select {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_enum)]
        strategy: StrategyArg,
        /// Policy checkpoint (required for --strategy ppo).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Random-baseline repeats per episode.
        #[arg(long)]
        repeats: Option<usize>,
        /// Subset size.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Identify calibration parameters from selections.
    Identify {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        selections: PathBuf,
    },
    /// Evaluation studies.
    Eval {
        #[command(subcommand)]
        study: EvalStudy,
    },
    /// Convert a JSON report to CSV.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
}

#[derive(Subcommand)]
enum EvalStudy {
    /// Compare selection strategies by det(S).
    Compare {
        #[arg(long)]
        dataset: PathBuf,
        /// Comma-separated strategies.
        #[arg(long, value_delimiter = ',', value_enum)]
        strategies: Vec<StrategyArg>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Cross-episode parameter variance per strategy.
    Variance {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, value_delimiter = ',', value_enum)]
        strategies: Vec<StrategyArg>,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Cross-episode output prediction from identified parameters.
    Predict {
        #[arg(long)]
        dataset: PathBuf,
        /// JSON file holding an array of 12 parameters.
        #[arg(long, conflicts_with = "params_csv")]
        params_json: Option<PathBuf>,
        /// parameters.csv from `identify`.
        #[arg(long, requires = "episode")]
        params_csv: Option<PathBuf>,
        /// Episode row to read from --params-csv.
        #[arg(long)]
        episode: Option<u64>,
        /// Points predicted per episode.
        #[arg(long, default_value_t = 8)]
        points: usize,
    },
}

fn run(cli: &Cli) -> docal::Result<()> {
    let file = load_file_config(cli.common.config.as_deref())?;
    let mut cfg = RunConfig::resolve(&cli.common, &file)?;
    let out_dir = cli.common.out.clone();

    match &cli.command {
        Command::Gen {
            episodes,
            postures,
            with_outputs,
            bounds,
        } => {
            if let Some(e) = episodes {
                cfg.dataset.n_episodes = *e;
            }
            if let Some(m) = postures {
                cfg.dataset.m_per_episode = *m;
            }
            if *with_outputs {
                cfg.dataset.with_outputs = true;
            }
            if let Some(b) = bounds {
                cfg.dataset.bounds = config::BoundsSpec::Named(b.clone()).resolve()?;
            }
            cfg.dataset.validate()?;
            commands::cmd_gen(&cfg, &out_dir)
        }
        Command::Train { episodes, hidden } => {
            if let Some(e) = episodes {
                cfg.train.total_episodes = *e;
            }
            if let Some(h) = hidden {
                cfg.train.hidden_dim = *h;
            }
            cfg.train.validate()?;
            commands::cmd_train(&cfg, &out_dir)
        }
        Command::Select {
            dataset,
            strategy,
            checkpoint,
            repeats,
            k,
        } => {
            if let Some(k) = k {
                cfg.select_k = *k;
            }
            let repeats = repeats.unwrap_or(cfg.random_repeats);
            commands::cmd_select(
                &cfg,
                &out_dir,
                dataset,
                *strategy,
                checkpoint.as_deref(),
                repeats,
            )
        }
        Command::Identify {
            dataset,
            selections,
        } => commands::cmd_identify(&cfg, &out_dir, dataset, selections),
        Command::Eval { study } => match study {
            EvalStudy::Compare {
                dataset,
                strategies,
                checkpoint,
            } => commands::cmd_eval_compare(
                &cfg,
                &out_dir,
                dataset,
                strategies,
                checkpoint.as_deref(),
            ),
            EvalStudy::Variance {
                dataset,
                strategies,
                checkpoint,
            } => commands::cmd_eval_variance(
                &cfg,
                &out_dir,
                dataset,
                strategies,
                checkpoint.as_deref(),
            ),
            EvalStudy::Predict {
                dataset,
                params_json,
                params_csv,
                episode,
                points,
            } => {
                let source = match (params_json, params_csv) {
                    (Some(p), None) => ParamsSource::JsonFile(p.clone()),
                    (None, Some(p)) => ParamsSource::IdentifyCsv {
                        path: p.clone(),
                        episode_id: episode.ok_or_else(|| {
                            docal::Error::InvalidArgument(
                                "--params-csv requires --episode".into(),
                            )
                        })?,
                    },
                    _ => {
                        return Err(docal::Error::InvalidArgument(
                            "predict needs exactly one of --params-json or --params-csv".into(),
                        ))
                    }
                };
                commands::cmd_eval_predict(&cfg, &out_dir, dataset, &source, *points)
            }
        },
        Command::Report { input } => commands::cmd_report(&out_dir, input),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e.category() {
                ErrorCategory::Usage => EXIT_USAGE,
                ErrorCategory::Data => EXIT_DATA,
                ErrorCategory::Identifiability => EXIT_IDENTIFIABILITY,
                ErrorCategory::Io => EXIT_IO,
            };
            ExitCode::from(code)
        }
    }
}
