use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("{element}: references unknown substation `{substation}`")]
    UnknownSubstation { element: String, substation: String },

    #[error("invalid chronic: {0}")]
    InvalidChronic(String),

    #[error("topology does not match grid: {0}")]
    TopologyMismatch(String),

    #[error("power flow diverged: {0}")]
    Diverged(#[from] crate::flow::Diverged),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("forecast horizon overrun: step {step} + horizon {horizon} > {steps} steps")]
    HorizonOverrun {
        step: usize,
        horizon: usize,
        steps: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("scenario generation failed: {0}")]
    Generation(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
