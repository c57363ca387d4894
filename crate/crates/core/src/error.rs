use thiserror::Error;

/// Errors raised by frame construction, estimation and certification routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix contains a non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("frame does not span R^{d}: smallest singular value {sigma_min:e} <= {threshold:e}")]
    NotSpanning {
        d: usize,
        sigma_min: f64,
        threshold: f64,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("matrix is not symmetric (asymmetry {asymmetry:e} exceeds {tolerance:e})")]
    NotSymmetric { asymmetry: f64, tolerance: f64 },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("shape matrix trace {trace} differs from dimension {d}")]
    TraceMismatch { trace: f64, d: usize },

    #[error("degenerate input: column {index} is zero")]
    ZeroColumn { index: usize },

    #[error("ill-conditioned Gram matrix (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("matrix is singular")]
    Singular,

    #[error("gradient flow stagnated: step size {step:e} underflowed")]
    Stagnation { step: f64 },

    #[error("exact infinity-expansion needs an even column count, got n = {n}; balanced vertices are fractional for odd n")]
    OddColumnCount { n: usize },

    #[error("frame is not doubly balanced (op_error / size = {ratio:e}); run solve_scaling first")]
    NotDoublyBalanced { ratio: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
