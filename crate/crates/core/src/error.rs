use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the estimation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("direction out of domain: {0}")]
    Domain(String),

    #[error("invalid array model: {0}")]
    InvalidArray(String),

    #[error("invalid pattern grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameters: {0}")]
    InvalidParameters(String),

    #[error("transmitter signal: {0}")]
    InvalidSignal(String),

    #[error("channel vanishes at frequency bin {bin}")]
    SingularChannel { bin: usize },

    #[error("path weights are ill-posed: {0}")]
    IllPosedWeights(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("optimizer: {0}")]
    Optimizer(String),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("observation format: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
