use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SgnError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("no eligible negative video for `{0}`")]
    NoNegative(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SgnError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        SgnError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, SgnError>;
