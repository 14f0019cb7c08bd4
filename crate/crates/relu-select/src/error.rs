use thiserror::Error;

use crate::network::NetworkError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BuildError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("degenerate parameter {name}: {reason}")]
    Degenerate { name: String, reason: String },
    #[error("precision: {0}")]
    Precision(String),
    #[error("contract violated: {0}")]
    Contract(String),
    #[error(transparent)]
    Network(#[from] NetworkError),
}

impl BuildError {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> BuildError {
        BuildError::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn degenerate(name: impl Into<String>, reason: impl Into<String>) -> BuildError {
        BuildError::Degenerate { name: name.into(), reason: reason.into() }
    }
}
