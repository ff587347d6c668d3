use std::path::PathBuf;

use thiserror::Error;

use crate::forecast::arima::ArimaParams;

pub type Result<T, E = Error> = std::result::Result<T, E>;

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

    /// Structurally malformed input (bad header, duplicate columns, bad key).
    #[error("format error: {0}")]
    Format(String),

    /// A required day, column or (series, day) cell is missing.
    #[error("coverage error: {0}")]
    Coverage(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// A forecast file names a series that the panel does not contain.
    #[error("reference error: {0}")]
    Reference(String),

    #[error("insufficient history: need at least {needed} observations, got {got}")]
    InsufficientHistory { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("leakage: {0}")]
    Leakage(String),

    #[error("empty evaluation window")]
    EmptyWindow,

    #[error("window mismatch: {0}")]
    WindowMismatch(String),

    #[error("ARIMA fit did not converge after {iterations} iterations")]
    NotConverged { iterations: usize, best: ArimaParams },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
