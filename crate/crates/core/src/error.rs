//! Error type shared across the library.

use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by library operations.
#[derive(Debug, Error)]
pub enum Error {
    /// A tuning parameter is outside its valid range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Input data violates an operation precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A series has zero variance (or zero entropy) where spread is required.
    #[error("degenerate series: {0}")]
    DegenerateSeries(String),

    /// Too few samples or beats for the requested computation.
    #[error("insufficient data: need at least {needed}, got {got} ({what})")]
    InsufficientData {
        what: String,
        needed: usize,
        got: usize,
    },

    /// A record or results file could not be parsed.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    /// A configuration file is malformed or out of range.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem failure.
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Library result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;
