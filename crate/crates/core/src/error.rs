use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("particle table: {0}")]
    Table(String),

    #[error("particle {index}: {reason}")]
    Particle { index: usize, reason: String },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("invalid metric tensor: {0}")]
    Metric(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("particle {index} has non-positive density {density}")]
    NonPositiveDensity { index: usize, density: f64 },

    #[error("numerical failure at step {step}: {reason}")]
    Numeric { step: u64, reason: String },

    #[error("config: {field}: {reason}")]
    Config { field: String, reason: String },

    #[error("snapshot: {0}")]
    Snapshot(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
