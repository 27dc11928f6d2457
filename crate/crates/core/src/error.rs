use std::path::PathBuf;

use thiserror::Error;

use crate::scenario::Violation;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed document: {0}")]
    Parse(String),
    #[error("scenario failed validation with {} violation(s)", .0.len())]
    Invalid(Vec<Violation>),
    #[error("unknown override key `{0}`")]
    UnknownOverride(String),
    #[error("dangling node reference: {0}")]
    DanglingNode(String),
    #[error("grid of {combinations} combinations exceeds the limit of {limit}")]
    GridTooLarge { combinations: f64, limit: f64 },
    #[error("solution dimensions do not match scenario: {0}")]
    DimensionMismatch(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
