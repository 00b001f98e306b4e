use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the benchmark pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("schema error in {table}: missing required column `{column}`")]
    MissingColumn { table: String, column: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("shape mismatch: {what} (expected {expected}, got {got})")]
    Shape {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("non-finite gradient in batch {batch} (epoch {epoch})")]
    NonFiniteGradient { epoch: usize, batch: usize },

    /// A runtime safety check failed (fold leakage, provenance).
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl Error {
    /// Process exit status for the command-line runner: 2 for configuration
    /// problems, 3 for unreadable or malformed data, 4 for everything that
    /// fails while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::MissingColumn { .. } | Error::Data(_) | Error::Input(_) | Error::Io { .. } | Error::Csv(_) => 3,
            _ => 4,
        }
    }
}
