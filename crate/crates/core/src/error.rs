use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by ingestion, metrics, training and the experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("no comparable pairs")]
    NoComparablePairs,

    #[error("degenerate decomposition: {0}")]
    Degenerate(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("training diverged at epoch {epoch}, step {step}: {message}")]
    TrainingDiverged {
        epoch: usize,
        step: usize,
        message: String,
        dump: Option<PathBuf>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for failures caused by numerics rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_) | Error::TrainingDiverged { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
