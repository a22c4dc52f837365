use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("range error: {0}")]
    Range(String),
    #[error("variation error: {0}")]
    Variation(String),
    #[error("unsupported variation: {0}")]
    UnsupportedVariation(String),
    #[error("value error: {0}")]
    Value(String),
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("shape error: {0}")]
    Shape(String),
    #[error("index error: {0}")]
    Index(String),
    #[error("episode over after {0} steps")]
    EpisodeOver(usize),
    #[error("config error: {0}")]
    Config(String),
    #[error("numeric error in {layer}: {msg}")]
    Numeric { layer: String, msg: String },
    #[error("corrupt file: {0}")]
    Corruption(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("data quality error in {env}: {msg}")]
    DataQuality { env: String, msg: String },
    #[error("ordering error: {0}")]
    Ordering(String),
    #[error("usage error: {0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn numeric(layer: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Numeric { layer: layer.into(), msg: msg.into() }
    }

    /// Process exit code for the command-line front end: 1 for usage
    /// problems, 2 for data, numeric and I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Config(_) => 1,
            _ => 2,
        }
    }
}
