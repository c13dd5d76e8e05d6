use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("gradient of `{symbol}` is singular at xi = 0")]
    SingularPoint { symbol: String },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("argument outside domain: {0}")]
    Domain(String),

    #[error("insufficient data: need at least {needed} usable points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("insufficient samples: no Monte Carlo point landed in the shell ({samples} drawn)")]
    InsufficientSamples { samples: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("field is under-resolved: spectral tail {tail:.3e} exceeds cutoff {cutoff:.3e}")]
    Unresolved { tail: f64, cutoff: f64 },

    #[error("truncation: box length {box_len} is below 12 sigma = {required}")]
    Truncation { box_len: f64, required: f64 },

    #[error("refused: {0}")]
    Refused(String),

    #[error("internal inconsistency: {0}")]
    Inconsistent(String),

    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),

    #[error("io: {0}")]
    Io(String),

    #[error("parse: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
