//! Crate-wide error type and exit-code mapping.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration; `key` names the offending field.
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },

    /// A caller violated an operation precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A training run produced a non-finite or overflowing parameter.
    #[error("run {run_index} diverged at update {update_index}: {detail}")]
    Diverged {
        run_index: usize,
        update_index: u64,
        detail: String,
    },

    /// An estimator could not produce a meaningful value.
    #[error("estimator error: {0}")]
    Estimator(String),

    #[error("io error on `{path}`: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in `{path}`: {message}")]
    Parse { path: String, message: String },
}

impl Error {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 for validation problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } | Error::Contract(_) | Error::Parse { .. } => 1,
            Error::Diverged { .. } | Error::Estimator(_) | Error::Io { .. } => 2,
        }
    }
}
