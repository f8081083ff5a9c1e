use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the quality pipeline.
#[derive(Debug, Error)]
pub enum VqaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("contract violation: {0}")]
    ContractViolation(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode frame {frame} of {uri}: {reason}")]
    Decode {
        uri: String,
        frame: usize,
        reason: String,
    },

    #[error("unsupported video container: {0}")]
    UnsupportedContainer(String),

    #[error("validation failed:\n  {}", .0.join("\n  "))]
    Validation(Vec<String>),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("adapter '{name}' is not available: {reason}")]
    AdapterUnavailable { name: String, reason: String },
}

impl VqaError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VqaError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        VqaError::InvalidArgument(msg.into())
    }
}

pub type Result<T, E = VqaError> = std::result::Result<T, E>;
