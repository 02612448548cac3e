use thiserror::Error;

pub type Result<T, E = PanfisError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum PanfisError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension mismatch between rules: rule 0 has dimension {first}, rule {index} has dimension {other}")]
    RuleDimensionMismatch {
        first: usize,
        index: usize,
        other: usize,
    },

    #[error("{what} is not positive definite (smallest eigenvalue {min_eigenvalue})")]
    NotPositiveDefinite { what: String, min_eigenvalue: f64 },

    #[error("{what} is not symmetric (max asymmetry {asymmetry})")]
    NotSymmetric { what: String, asymmetry: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("empty rule base")]
    EmptyRuleBase,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric breakdown: {0}")]
    NumericBreakdown(String),

    #[error("malformed document: {0}")]
    Malformed(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl PanfisError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        PanfisError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
