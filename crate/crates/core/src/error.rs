use std::path::PathBuf;

use thiserror::Error;

/// Coarse failure category, used by the CLI to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Validation,
    Io,
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("duplicate image ids: {}", .0.join(", "))]
    DuplicateIds(Vec<String>),

    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("unknown layer name `{0}`")]
    UnknownLayer(String),

    #[error(transparent)]
    Format(#[from] FormatError),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Io { .. } => ErrorCategory::Io,
            Error::Format(FormatError::Io(_)) => ErrorCategory::Io,
            Error::Internal(_) => ErrorCategory::Internal,
            _ => ErrorCategory::Validation,
        }
    }

    /// Short stable identifier for machine-readable error output.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::NonFinite { .. } => "non_finite",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::DuplicateIds(_) => "duplicate_ids",
            Error::Alignment(_) => "alignment",
            Error::UnknownLayer(_) => "unknown_layer",
            Error::Format(f) => f.code(),
            Error::Io { .. } => "io",
            Error::Internal(_) => "internal",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

/// Failures while decoding one of the interchange file formats.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic bytes {0:?}, expected \"FMAT\"")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u64),

    #[error("file truncated at byte {offset}: {what}")]
    Truncated { offset: u64, what: &'static str },

    #[error("malformed header at byte {offset}: {message}")]
    Header { offset: u64, message: String },

    #[error("payload length mismatch: header implies {expected} bytes, found {actual}")]
    PayloadLength { expected: u64, actual: u64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("line {line}: {message}")]
    Line { line: usize, message: String },

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: u64, message: String },

    #[error("unknown {field} value `{value}` on line {line}")]
    Enumeration {
        field: &'static str,
        value: String,
        line: usize,
    },

    #[error("count mismatch: {0}")]
    CountMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl FormatError {
    pub fn code(&self) -> &'static str {
        match self {
            FormatError::BadMagic(_) => "bad_magic",
            FormatError::UnsupportedVersion(_) => "unsupported_version",
            FormatError::Truncated { .. } => "truncated",
            FormatError::Header { .. } => "bad_header",
            FormatError::PayloadLength { .. } => "payload_length",
            FormatError::Shape(_) => "shape_mismatch",
            FormatError::Line { .. } => "bad_line",
            FormatError::Parse { .. } => "parse",
            FormatError::Enumeration { .. } => "bad_enum",
            FormatError::CountMismatch(_) => "count_mismatch",
            FormatError::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
