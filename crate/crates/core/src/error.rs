use std::path::PathBuf;

use thiserror::Error;

/// Coarse failure category, used by the command line to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Caller supplied an invalid argument or configuration.
    Argument,
    /// An input file or in-memory input violated its format contract.
    Format,
    /// A resource guard refused to run the computation.
    Guard,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: bad magic bytes {found:?}, expected {expected:?}")]
    BadMagic {
        context: String,
        expected: [u8; 4],
        found: [u8; 4],
    },

    #[error("{context}: unsupported format version {version}")]
    BadVersion { context: String, version: u32 },

    #[error("{context}: {message}")]
    Malformed { context: String, message: String },

    #[error("{context}: row {row} has {found} values, expected {expected}")]
    RowLength {
        context: String,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{context}: non-finite value at row {row}, column {col}")]
    NonFinite {
        context: String,
        row: usize,
        col: usize,
    },

    #[error("embedding row {row} has zero norm")]
    ZeroNorm { row: usize },

    #[error("probability row {row} is not a distribution: {message}")]
    InvalidProbability { row: usize, message: String },

    #[error("label {label} at position {index} is out of range for {num_classes} classes")]
    LabelOutOfRange {
        index: usize,
        label: usize,
        num_classes: usize,
    },

    #[error("index {index} is out of range for {len} examples")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("{what}: length {found} does not match {expected} examples")]
    LengthMismatch {
        what: String,
        expected: usize,
        found: usize,
    },

    #[error("example {0} is already selected")]
    AlreadySelected(usize),

    #[error("invalid budget: {0}")]
    Budget(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("class {0} has no examples")]
    EmptyClass(usize),

    #[error("ground-truth labels are required for {0}")]
    MissingGroundTruth(&'static str),

    #[error("resource guard: {0}")]
    Guard(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Budget(_)
            | Error::InvalidArgument(_)
            | Error::AlreadySelected(_)
            | Error::MissingGroundTruth(_) => ErrorKind::Argument,
            Error::Guard(_) => ErrorKind::Guard,
            _ => ErrorKind::Format,
        }
    }

    pub(crate) fn malformed(context: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Malformed {
            context: context.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
