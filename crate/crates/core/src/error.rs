use thiserror::Error;

use crate::negtype::NegTypeReport;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("metric `{metric}` cannot be evaluated on {point} points")]
    IncompatiblePoint { metric: String, point: &'static str },

    #[error("precomputed metric `{0}` expects index points, got raw points")]
    PrecomputedNeedsIndex(String),

    #[error("index {index} out of range for {n} points")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("invalid power {0}: must lie in (0, 1]")]
    InvalidPower(f64),

    #[error("invalid minkowski exponent {0}: must be finite and >= 1")]
    InvalidMinkowski(f64),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),

    #[error("invalid measure: {0}")]
    InvalidMeasure(String),

    #[error("size mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },

    #[error("weight mismatch between the two centered matrices")]
    WeightMismatch,

    #[error("operation requires uniform (empirical) weights")]
    WeightedUnsupported,

    #[error("sample too large for brute-force oracle: n = {n}, limit {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("degenerate marginal: all {0} points coincide, the test is undefined")]
    DegenerateMarginal(&'static str),

    #[error("symmetric eigensolver failed to converge")]
    EigenFailure,

    #[error("sample is not of negative type (max eigenvalue {:.3e})", .0.max_eigenvalue)]
    NotNegativeType(Box<NegTypeReport>),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty contingency table")]
    EmptyTable,

    #[error("zero marginal for category `{0}`")]
    ZeroMarginal(String),

    #[error("{path}: line {line}, column `{column}`: {message}")]
    Parse {
        path: String,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{path}: {message}")]
    Dataset { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
