use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum SimError {
    /// A configuration value is out of range or inconsistent.
    #[error("invalid configuration `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// A numeric argument outside the domain of a formula.
    #[error("domain error: {0}")]
    Domain(String),

    /// A caller broke an API contract (shape mismatch, malformed action, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Parameters or gradients became non-finite.
    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl SimError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        SimError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.into(),
            source,
        }
    }
}
