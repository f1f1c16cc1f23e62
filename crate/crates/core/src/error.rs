use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("impossible outcome: mask bit {index} contradicts probability {prob}")]
    ImpossibleOutcome { index: usize, prob: f64 },

    #[error("empty coreset: the mask selects no examples")]
    EmptyCoreset,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("run failed: {0}")]
    Runtime(String),

    #[error("{}: {source}", path.display())]
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

    /// Process exit code for the CLI: 1 config, 2 data, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Input(_) => 1,
            Error::Data(_) | Error::Io { .. } => 2,
            Error::ImpossibleOutcome { .. }
            | Error::EmptyCoreset
            | Error::NonFinite(_)
            | Error::Runtime(_) => 3,
        }
    }
}
