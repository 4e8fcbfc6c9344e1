use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate range: max equals min ({0})")]
    DegenerateRange(f64),

    #[error("insufficient beats: need at least {needed}, found {found}")]
    InsufficientBeats { needed: usize, found: usize },

    #[error("cannot encode field `{field}`: unknown code {code}")]
    Encoding { field: &'static str, code: u32 },

    #[error("degenerate training data: {0}")]
    DegenerateTraining(String),

    #[error("incompatible artifact: {0}")]
    Compatibility(String),

    #[error("cannot stratify: {0}")]
    Stratification(String),

    #[error("AUC undefined: labels contain a single class")]
    UndefinedAuc,

    #[error("agent not ready: replay memory holds {have} transitions, warm-up needs {need}")]
    NotReady { have: usize, need: usize },

    #[error("corrupted model: {0}")]
    CorruptedModel(String),

    #[error("file corrupted: {0}")]
    Corruption(String),

    #[error("unsupported schema version {found} (this build reads version {supported}); migrate the file first")]
    Migration { found: u32, supported: u32 },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("experiment error: {0}")]
    Experiment(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input (files, flags, configs)
    /// rather than an internal failure.
    pub fn is_user_error(&self) -> bool {
        matches!(
            self,
            Error::Parameter(_)
                | Error::Compatibility(_)
                | Error::Corruption(_)
                | Error::Migration { .. }
                | Error::Parse { .. }
                | Error::Config(_)
                | Error::Io(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
