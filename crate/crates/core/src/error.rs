use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("cannot sample {requested} primes from a universe of {universe}")]
    UniverseTooSmall { requested: usize, universe: usize },

    #[error("value is not invertible modulo q")]
    NotInvertible,

    #[error("malformed record: {0}")]
    Malformed(String),

    #[error("record was created under different parameters")]
    ParamsMismatch,

    #[error("invalid seed: {0}")]
    InvalidSeed(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite embedding value at coordinate {0}")]
    NonFinite(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
