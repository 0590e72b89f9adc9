use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// File could not be read or written.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    /// A line of an input file failed to parse.
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    /// Input parsed but violated a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),
    /// Invalid configuration value.
    #[error("config error: {0}")]
    Config(String),
    /// Remote judge transport failure (after retries).
    #[error("transport error: {0}")]
    Transport(String),
    /// Agreement is undefined when no valid verdict pairs exist.
    #[error("agreement undefined: no valid verdict pairs")]
    UndefinedAgreement,
    /// An internal invariant was violated.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 2 input problems, 3 transport, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::Config(_)
            | Error::UndefinedAgreement => 2,
            Error::Transport(_) => 3,
            Error::Internal(_) => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
