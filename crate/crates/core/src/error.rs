//! The error type shared by every module.

use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: empty file")]
    EmptyFile { path: PathBuf },

    #[error("dimension mismatch at row {row}: expected {expected}, found {found}")]
    DimensionMismatch {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },

    #[error("duplicate id {id:?} at row {row}")]
    DuplicateId { id: String, row: usize },

    #[error("all-zero vector for id {id:?}")]
    ZeroVector { id: String },

    #[error("malformed input at row {row}: {message}")]
    Malformed { row: usize, message: String },

    #[error("vector dimensions differ: {left} vs {right}")]
    DimensionDiffers { left: usize, right: usize },

    #[error("zero-length vector has no direction")]
    ZeroLength,

    #[error("vertex {index} out of range for {n} vertices")]
    VertexOutOfRange { index: usize, n: usize },

    #[error("invalid edge {src} -> {dst}: {reason}")]
    InvalidEdge {
        src: usize,
        dst: usize,
        reason: &'static str,
    },

    #[error("graph needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),

    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("seed set is empty")]
    EmptySeedSet,

    #[error("budget {budget} out of range for {n} examples")]
    BudgetOutOfRange { budget: usize, n: usize },

    #[error("{uncertain} edges with 0 < p < 1 exceed the enumeration limit of {limit}")]
    TooManyUncertainEdges { uncertain: usize, limit: usize },

    #[error("search space too large: {0}")]
    SearchSpaceTooLarge(String),

    #[error("unknown id {0:?}")]
    UnknownId(String),

    #[error("graph file: {0}")]
    GraphFormat(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }

    /// Whether the failure came from the filesystem rather than the content.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }
}
