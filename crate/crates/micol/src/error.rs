use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("unknown document id: {0}")]
    UnknownDoc(String),

    #[error("unknown meta-pattern name: {0}")]
    UnknownPattern(String),

    #[error("sampling impossible: {0}")]
    Sampling(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 validation, 2 i/o, 3 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            Error::Parse { .. }
            | Error::Validation(_)
            | Error::UnknownDoc(_)
            | Error::UnknownPattern(_)
            | Error::Sampling(_)
            | Error::Config(_)
            | Error::Checkpoint(_) => 1,
        }
    }
}
