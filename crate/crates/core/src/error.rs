//! Library-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by every fallible operation in this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Operands have incompatible or unusable shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// An iterative numerical routine failed to converge or produced
    /// non-finite values.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// A configuration value is out of its documented range.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// An underlying filesystem operation failed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Input data violates its documented format.
    #[error("malformed input: {0}")]
    MalformedInput(String),

    /// Parameter selection could not produce a usable result, for example
    /// because every candidate failed or the labels carry no signal.
    #[error("training failure: {0}")]
    Training(String),
}

impl Error {
    /// Wraps an I/O error with the path it occurred on.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
