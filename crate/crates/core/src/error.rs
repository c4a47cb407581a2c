use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse failure category, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Io,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed manifest row at line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("°Brix value {value} at line {line} is outside the refractometer range [9, 26]")]
    BrixOutOfRange { line: usize, value: f64 },

    #[error("unknown atomic split `{0}` (expected one of A..I)")]
    UnknownAtomicSplit(String),

    #[error("unknown split name `{0}`")]
    UnknownSplitName(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid grid {n_bin_x}x{n_bin_y} for cross mode {mode}: {reason}")]
    InvalidGrid {
        n_bin_x: usize,
        n_bin_y: usize,
        mode: &'static str,
        reason: &'static str,
    },

    #[error("image of {width}x{height} is too small for a {n_bin_x}x{n_bin_y} grid")]
    ImageTooSmall {
        width: usize,
        height: usize,
        n_bin_x: usize,
        n_bin_y: usize,
    },

    #[error("ridge system is singular (lambda = {lambda}); rank-deficient features")]
    SingularSystem { lambda: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("degenerate variance: {0}")]
    DegenerateVariance(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("too few samples: need at least {needed}, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("too few records: need at least {needed}, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error("split `{0}` has no white-balanced counterpart loaded")]
    MissingVariant(String),

    #[error("config {config}: {source}")]
    InConfig {
        config: String,
        #[source]
        source: Box<Error>,
    },

    #[error("failed to decode image {path}: {reason}")]
    ImageDecode { path: PathBuf, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::MalformedRow { .. }
            | Error::BrixOutOfRange { .. }
            | Error::UnknownAtomicSplit(_)
            | Error::EmptyInput(_)
            | Error::LengthMismatch { .. }
            | Error::DimensionMismatch { .. }
            | Error::TooFewSamples { .. }
            | Error::TooFewRecords { .. }
            | Error::MissingVariant(_)
            | Error::ImageTooSmall { .. }
            | Error::Csv(_)
            | Error::Json(_) => ErrorKind::Data,
            Error::UnknownSplitName(_)
            | Error::InvalidConfig(_)
            | Error::InvalidGrid { .. }
            | Error::InvalidInput(_) => ErrorKind::Usage,
            Error::SingularSystem { .. } | Error::DegenerateVariance(_) => ErrorKind::Numerical,
            Error::ImageDecode { .. } | Error::Io { .. } => ErrorKind::Io,
            Error::InConfig { source, .. } => source.kind(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
