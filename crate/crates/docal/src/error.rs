//! Error type shared by all modules.

use std::path::PathBuf;

/// Everything that can go wrong across the toolkit.
///
/// Variants are grouped by how a front-end should classify them:
/// usage errors (bad arguments), data errors (malformed or mismatched
/// inputs), identifiability errors (rank/conditioning failures), and
/// I/O errors (with path context).
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what} must not be empty")]
    EmptyInput { what: &'static str },

    #[error("length mismatch: {left_name} has {left}, {right_name} has {right}")]
    LengthMismatch {
        left_name: &'static str,
        left: usize,
        right_name: &'static str,
        right: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("design matrix is rank deficient: numerical rank {rank} < {needed}")]
    RankDeficient { rank: usize, needed: usize },

    #[error("matrix is ill-conditioned: condition estimate {cond:.3e} exceeds cap {cap:.3e}")]
    IllConditioned { cond: f64, cap: f64 },

    #[error("exhaustive enumeration refused: {subsets} subsets exceed cap {cap}")]
    EnumerationCapExceeded { subsets: u128, cap: u64 },

    #[error("dataset episodes carry no outputs, but the operation requires them")]
    MissingOutputs,

    #[error("action {action} is unavailable (already selected or out of range)")]
    UnavailableAction { action: usize },

    #[error("rollout buffer holds an incomplete episode ({steps} steps, expected {expected})")]
    IncompleteEpisode { steps: usize, expected: usize },

    #[error("non-finite loss in update epoch {epoch}: {detail}")]
    NonFiniteLoss { epoch: usize, detail: String },

    #[error("malformed data: {0}")]
    Format(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Coarse classification used by the CLI to pick exit codes.
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            InvalidArgument(_) | EnumerationCapExceeded { .. } => ErrorCategory::Usage,
            EmptyInput { .. } | LengthMismatch { .. } | NonFinite(_) | MissingOutputs
            | UnavailableAction { .. } | IncompleteEpisode { .. } | NonFiniteLoss { .. }
            | Format(_) => ErrorCategory::Data,
            RankDeficient { .. } | IllConditioned { .. } => ErrorCategory::Identifiability,
            Io { .. } => ErrorCategory::Io,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Usage,
    Data,
    Identifiability,
    Io,
}

pub type Result<T> = std::result::Result<T, Error>;
