use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A configuration value is missing, mistyped, unknown or out of range.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    Shape {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// API misuse, such as calling backward without a forward cache.
    #[error("usage error: {0}")]
    Usage(String),

    /// A simulator or training invariant was violated at runtime.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input file (checkpoint, metrics CSV, ...).
    #[error("format error: {0}")]
    Format(String),
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
