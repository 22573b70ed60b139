use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] phifem_core::Error),
    #[error("matrix is numerically singular: {0}")]
    Singular(String),
    #[error("relative residual {residual:e} exceeds {limit:e}")]
    Residual { residual: f64, limit: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("n = {n}: {source}")]
    AtLevel {
        n: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn at_level(self, n: usize) -> Error {
        Error::AtLevel { n, source: Box::new(self) }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Error {
        Error::Io { path: path.into(), source }
    }
}
