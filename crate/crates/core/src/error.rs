use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shell: {0}")]
    InvalidShell(String),

    #[error("invalid constellation: {0}")]
    InvalidConstellation(String),

    #[error("altitude must be positive, got {0} km")]
    NonPositiveAltitude(f64),

    #[error("subpoint requires an earth-fixed position")]
    InertialFrame,

    #[error("invalid ground station `{name}`: {reason}")]
    InvalidStation { name: String, reason: String },

    #[error("invalid topology: {0}")]
    InvalidTopology(String),

    #[error("no path from {src} to {dst}")]
    Unreachable { src: String, dst: String },

    #[error("invalid parameter `{key}`: {reason}")]
    InvalidParameter { key: String, reason: String },

    #[error("link {0} has zero capacity")]
    ZeroCapacity(String),

    #[error("invalid traffic input: {0}")]
    InvalidTraffic(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("{path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            key: key.into(),
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
