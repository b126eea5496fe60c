use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Broad failure class, used by the CLI to choose an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Runtime,
}

impl ErrorClass {
    pub fn exit_code(self) -> u8 {
        match self {
            ErrorClass::Config => 1,
            ErrorClass::Data => 2,
            ErrorClass::Runtime => 3,
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path}: unknown column `{column}`")]
    UnknownColumn { path: PathBuf, column: String },

    #[error("{path}:{line}: label `{value}` is not 0 or 1")]
    BadLabel {
        path: PathBuf,
        line: u64,
        value: String,
    },

    #[error("{path}:{line}: cannot parse `{value}` in column `{column}` as a number")]
    BadNumber {
        path: PathBuf,
        line: u64,
        column: String,
        value: String,
    },

    #[error("{path}:{line}: expected {expected} fields, found {found}")]
    MalformedRow {
        path: PathBuf,
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("column `{0}` has no non-missing values")]
    AllMissingColumn(String),

    #[error("column `{0}` still contains missing values")]
    MissingValues(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("fitness evaluated to non-finite value {value} at iteration {iteration}, particle {particle}")]
    NonFinite {
        value: f64,
        iteration: usize,
        particle: usize,
    },

    #[error("{path}:{line}: {message}")]
    Config {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: `{key}` {reason}")]
    ConfigValue {
        path: PathBuf,
        key: String,
        reason: String,
    },

    #[error("{path}: malformed checkpoint: {message}")]
    Checkpoint { path: PathBuf, message: String },
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config { .. } | Error::ConfigValue { .. } => ErrorClass::Config,
            Error::Io { .. }
            | Error::Csv { .. }
            | Error::UnknownColumn { .. }
            | Error::BadLabel { .. }
            | Error::BadNumber { .. }
            | Error::MalformedRow { .. }
            | Error::AllMissingColumn(_)
            | Error::MissingValues(_)
            | Error::EmptyDataset
            | Error::Checkpoint { .. } => ErrorClass::Data,
            Error::DimensionMismatch { .. }
            | Error::InvalidArgument { .. }
            | Error::NonFinite { .. } => ErrorClass::Runtime,
        }
    }
}
