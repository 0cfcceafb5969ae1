use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("vector has zero variance")]
    ZeroVariance,

    #[error("grouping variable has a single level")]
    SingleGroup,

    #[error("no covariate passed the pre-selection threshold")]
    EmptySelection,

    #[error("trace contains no retained samples")]
    EmptyTrace,

    #[error("unknown column: {0}")]
    UnknownColumn(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("only one class present")]
    SingleClass,

    #[error("fold {fold} is degenerate: {reason}")]
    FoldDegenerate { fold: usize, reason: String },

    #[error("unknown scenario: {0}")]
    UnknownScenario(String),

    #[error("{path}: line {line}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: usize,
        message: String,
    },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::UnknownScenario(_) => 1,
            Error::NotPositiveDefinite { .. } | Error::ZeroVariance | Error::SingleGroup => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
