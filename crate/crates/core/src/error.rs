use std::path::PathBuf;

use thiserror::Error;

use crate::dataset::ClassId;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("io error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {file} (row {row}): {message}")]
    Parse {
        file: String,
        row: usize,
        message: String,
    },

    #[error("dimension mismatch in {context} at row {row}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: String,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("class {0} appears in both the seen and unseen split")]
    SplitOverlap(ClassId),

    #[error("label {label} out of range in {context} at row {row}")]
    LabelOutOfRange {
        context: String,
        row: usize,
        label: i64,
    },

    #[error("attribute row for class {0} is all zeros")]
    ZeroAttributeRow(ClassId),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("singular normal equations (rank-deficient system with lambda = {lambda}); use lambda > 0")]
    SingularSystem { lambda: f64 },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("model fit failed at iteration {iteration}: {source}")]
    FitFailed {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
