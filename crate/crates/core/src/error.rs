use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("feature dimension overflows for S={states}, d={delay}, o={degree}")]
    Capacity { states: usize, delay: usize, degree: usize },

    #[error("index {index} needs {delay} past states but only {available} exist")]
    InsufficientHistory {
        index: usize,
        delay: usize,
        available: usize,
    },

    #[error("trajectory {index} has {len} samples, needs at least {needed}")]
    TooShort {
        index: usize,
        len: usize,
        needed: usize,
    },

    #[error("incompatible trajectories: {0}")]
    Incompatible(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("RRMSE undefined: reference state {state} has zero standard deviation")]
    UndefinedScore { state: usize },

    #[error("integration failed at t={t}: {reason}")]
    Integration { t: f64, reason: String },

    #[error("config error in `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("model file {path}: {message}")]
    ModelFormat { path: PathBuf, message: String },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("csv {context}: {source}")]
    Csv {
        context: String,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Whether the error stems from user configuration rather than numerics or I/O.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config { .. })
    }
}
