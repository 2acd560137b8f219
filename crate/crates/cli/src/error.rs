use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Failures of a CLI run, each mapped to a process exit status.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Core(#[from] weaklink::Error),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
    #[error("replay mismatch: {0}")]
    Mismatch(String),
}

impl CliError {
    pub fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> Self {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }

    pub fn exit_code(&self) -> i32 {
        use weaklink::Error as E;
        match self {
            CliError::Parse { .. } => 2,
            CliError::Invalid(_) => 3,
            CliError::Core(E::Network(_) | E::Validation(_) | E::UnsupportedRegime(_)) => 3,
            CliError::Core(E::Capacity(_)) => 4,
            CliError::Core(E::Numerical(_)) => 5,
            CliError::Core(E::Consistency(_)) | CliError::Io { .. } | CliError::Mismatch(_) => 1,
        }
    }
}

impl From<weaklink::NetworkError> for CliError {
    fn from(e: weaklink::NetworkError) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = Result<T, CliError>;
