use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("symbol {symbol} outside alphabet of size {size}")]
    SymbolOutOfRange { symbol: usize, size: usize },

    #[error("type class has {size:.3e} elements, above the enumeration guard {guard:.0e}")]
    EnumerationTooLarge { size: f64, guard: f64 },

    #[error("enumeration of {0} exceeds the brute-force size guard")]
    SearchTooLarge(String),

    #[error("infeasible parameters: {0}")]
    Infeasible(String),

    #[error("solver did not converge after {iterations} iterations (gap {gap:.3e}, best value {value:.6})")]
    NoConvergence {
        iterations: usize,
        gap: f64,
        value: f64,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
