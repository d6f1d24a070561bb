use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("invalid configuration key {key:?}: {msg}")]
    Config { key: String, msg: String },

    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("checkpoint version mismatch: expected {expected}, found {found:?}")]
    Version { expected: u32, found: String },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Validation problems caused by user input, as opposed to failures at run time.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parse { .. } | Error::Invalid(_) | Error::Config { .. } | Error::Version { .. } | Error::Corrupt(_) => {
                true
            }
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            Error::Shape(_) | Error::Diverged { .. } => false,
        }
    }
}
