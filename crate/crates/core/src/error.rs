use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed graph: {0}")]
    MalformedGraph(String),

    #[error("self-loop on vertex {vertex} rejected; the normalization adds the identity itself")]
    SelfLoop { vertex: usize },

    #[error("batch assembly: {0}")]
    Batch(String),

    #[error("shape error in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("non-finite value produced by {location}")]
    NumericFault { location: String },

    #[error("label {label} out of range for {classes} classes")]
    Label { label: usize, classes: usize },

    #[error("usage: {0}")]
    Usage(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("ingestion of {path}: {message}")]
    Ingestion { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("incompatible file: {0}")]
    Incompatible(String),

    #[error("all {0} training repeats failed")]
    AllRepeatsFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn shape(op: &'static str, lhs: &[usize], rhs: &[usize]) -> Self {
        Error::Shape {
            op,
            lhs: lhs.to_vec(),
            rhs: rhs.to_vec(),
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub(crate) fn ingestion(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Ingestion {
            path: path.into(),
            message: message.into(),
        }
    }
}
