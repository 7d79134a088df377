use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, DkrError>;

#[derive(Debug, Error)]
pub enum DkrError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("segment {segment}: {source}")]
    Segment {
        segment: usize,
        #[source]
        source: Box<DkrError>,
    },

    #[error(transparent)]
    Data(#[from] DataError),

    #[error("model file: {0}")]
    ModelFormat(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Failures while reading or preparing a dataset.
#[derive(Debug, Error)]
pub enum DataError {
    #[error("cannot read {path}: {source}")]
    MissingFile {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}, column {column}: non-numeric value {value:?}")]
    NonNumeric {
        row: usize,
        column: usize,
        value: String,
    },

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("row {row}: quoted fields are not supported")]
    Quoted { row: usize },

    #[error("empty table")]
    EmptyTable,

    #[error("table has no covariate columns besides the label")]
    NoCovariates,

    #[error("label column {0} not found")]
    MissingLabelColumn(String),

    #[error("column {column} has zero variance")]
    ZeroVariance { column: usize },

    #[error("non-finite value at row {row}, column {column}")]
    NonFinite { row: usize, column: usize },
}

/// Coarse failure category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl DkrError {
    pub fn class(&self) -> ErrorClass {
        match self {
            DkrError::InvalidArgument(_) | DkrError::DimensionMismatch { .. } => ErrorClass::Usage,
            DkrError::Numerical(_) => ErrorClass::Numerical,
            DkrError::Segment { source, .. } => source.class(),
            DkrError::Data(DataError::MissingLabelColumn(_)) => ErrorClass::Usage,
            DkrError::Data(_) | DkrError::ModelFormat(_) | DkrError::Io { .. } => ErrorClass::Data,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        DkrError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        DkrError::Io {
            path: path.into(),
            source,
        }
    }
}
