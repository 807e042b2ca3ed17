use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("expected event count {expected:.3e} exceeds the event-count capacity {capacity:.3e}")]
    CapacityExceeded { expected: f64, capacity: f64 },

    #[error("degenerate stream: {0}")]
    DegenerateStream(&'static str),

    #[error("degenerate model: {0}")]
    DegenerateModel(&'static str),

    #[error("required sample size is unbounded: the model has zero bias and zero autocorrelation")]
    Unbounded,

    #[error("{test}: sequence too short ({actual} bits, need at least {required})")]
    TooShort {
        test: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
