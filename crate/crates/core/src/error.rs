use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the domain adaptation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain `{id}`: {reason}")]
    InvalidDomain { id: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("marginal has a nonpositive or non-finite entry at index {index} ({value})")]
    InvalidMarginal { index: usize, value: f64 },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("plan entry ({row}, {col}) is not strictly positive ({value})")]
    NonPositivePlan { row: usize, col: usize, value: f64 },

    #[error("exact OT oracle limited to 64 plan entries, got {rows}x{cols}")]
    InstanceTooLarge { rows: usize, cols: usize },

    #[error("singular normal equations; increase the ridge penalty")]
    SingularSystem,

    #[error("{path}: row {row}, column {column}: {reason}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        reason: String,
    },

    #[error("{path}: ragged rows: row {row} has {found} columns, expected {expected}")]
    RaggedRows {
        path: PathBuf,
        row: usize,
        found: usize,
        expected: usize,
    },

    #[error("{path}: unsupported IDX magic 0x{magic:08x}")]
    UnsupportedIdxMagic { path: PathBuf, magic: u32 },

    #[error("{path}: truncated IDX file: expected {expected} bytes, found {found}")]
    TruncatedIdx {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("image/label count mismatch: {images} images, {labels} labels")]
    CountMismatch { images: usize, labels: usize },

    #[error("hop {index} onto `{domain}` failed: {source}")]
    Hop {
        index: usize,
        domain: String,
        #[source]
        source: Box<Error>,
        /// The path completed before the failing hop.
        partial: Box<crate::cot::TransferPath>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
