use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must have at least 2 rows and 2 columns, got {rows}x{cols}")]
    TooSmall { rows: usize, cols: usize },

    #[error("column {0} (1-based) has zero variance")]
    ConstantColumn(usize),

    #[error("matrix is not standardized (columns must have mean 0 and unit norm)")]
    NotStandardized,

    #[error("singular value decomposition did not converge")]
    NumericalFailure,

    #[error("model is not identifiable (condition measure {measure:e} below tolerance {tolerance:e})")]
    NotIdentifiable { measure: f64, tolerance: f64 },

    #[error("k = {k} exceeds the numerical rank {rank}")]
    KTooLarge { k: usize, rank: usize },

    #[error("target column {} (1-based) out of range for {cols} columns", target + 1)]
    TargetOutOfRange { target: usize, cols: usize },

    #[error("identifiability denominator D = {0:e} is degenerate")]
    DegenerateD(f64),

    #[error("level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),

    #[error("noise scale must be positive and finite, got {0}")]
    InvalidSigma(f64),

    #[error("bias bound must be nonnegative and finite, got {0}")]
    InvalidBound(f64),

    #[error("not enough degrees of freedom: n = {n}, k = {k}")]
    InsufficientDof { n: usize, k: usize },

    #[error("structured design construction failed: alignment {alignment:.6} <= 0.99")]
    StructuredConstructionFailed { alignment: f64 },

    #[error("design matrix is rank deficient (rank {rank} < {cols} columns)")]
    RankDeficient { rank: usize, cols: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("parse error at row {row}, column {col}: {message}")]
    Parse { row: usize, col: usize, message: String },

    #[error("ragged rows: row {row} has {found} fields, expected {expected}")]
    RaggedRows { row: usize, found: usize, expected: usize },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::Usage(_)
            | Error::InvalidLevel(_)
            | Error::InvalidSigma(_)
            | Error::InvalidBound(_)
            | Error::TargetOutOfRange { .. }
            | Error::KTooLarge { .. } => 1,
            Error::NumericalFailure
            | Error::NotIdentifiable { .. }
            | Error::DegenerateD(_)
            | Error::StructuredConstructionFailed { .. } => 3,
            _ => 2,
        }
    }

    pub fn is_not_identifiable(&self) -> bool {
        matches!(self, Error::NotIdentifiable { .. })
    }
}
