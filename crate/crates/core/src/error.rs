use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("rank exhausted at step {step}: {detail}")]
    RankExhausted { step: usize, detail: String },

    #[error("calibration failed: {0}")]
    CalibrationFailure(String),

    #[error("nonstationary factor: |theta| = {0} >= 1")]
    Nonstationary(f64),

    #[error("malformed panel (line {line}): {detail}")]
    MalformedPanel { line: usize, detail: String },

    #[error("linear algebra failure: {0}")]
    Linalg(String),

    #[error("i/o error on {path}: {source}")]
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

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
