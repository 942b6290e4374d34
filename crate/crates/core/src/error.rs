use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("dataset is empty: {0}")]
    EmptyDataset(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("{kind} id {id} out of range (count {count})")]
    OutOfRange {
        kind: &'static str,
        id: usize,
        count: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("forward state is stale: parameters changed after the last propagation")]
    StaleForward,
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),
    #[error("no evaluable users (every user has an empty test set)")]
    NoEvaluableUsers,
    #[error("{users} users cannot fill {bins} fairness bins")]
    TooFewUsers { users: usize, bins: usize },
    #[error("{0}")]
    Run(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command-line driver: 1 usage, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidConfig(_) => 1,
            Error::NonFinite(_) | Error::StaleForward | Error::DimensionMismatch { .. } => 3,
            _ => 2,
        }
    }
}
