use std::path::PathBuf;

use thiserror::Error;

use crate::hdf5::H5Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Hdf5 { path: PathBuf, source: H5Error },
    #[error("dataset directory {} does not exist\n{hint}", path.display())]
    MissingDataset { path: PathBuf, hint: String },
    /// A file exists but its contents are not what the loader expects.
    #[error("{}: {message}", path.display())]
    Ingest { path: PathBuf, message: String },
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] pointgn_core::Error),
    #[error("evaluation failed: {0}")]
    Eval(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn ingest(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Self::Ingest {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit status: 1 for failures while evaluating, 2 for bad
    /// input data or configuration.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Eval(_) => 1,
            _ => 2,
        }
    }
}
