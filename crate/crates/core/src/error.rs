use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("solution diverged at t = {time}")]
    Divergence { time: f64 },

    #[error("bad operator cache {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("operator integrity check failed: {0}")]
    Integrity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sweep point n_el = {n_el}: {source}")]
    SweepPoint { n_el: usize, source: Box<Error> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::Shape { expected, found })
        }
    }
}
