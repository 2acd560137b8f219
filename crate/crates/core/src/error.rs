use thiserror::Error;

use crate::network::NetworkError;

/// Error categories surfaced by the library. The CLI maps each to an exit code.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("invalid parameter: {0}")]
    Validation(String),
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("internal consistency violated: {0}")]
    Consistency(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
