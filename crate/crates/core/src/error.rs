use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("exponential overflow: max 2u = {max_two_u:.3} exceeds {limit}")]
    Overflow { max_two_u: f64, limit: f64 },

    #[error("stereographic projection of the north pole is the point at infinity")]
    ProjectionPole,

    #[error("degenerate quantity: {0}")]
    Degenerate(String),

    #[error("root bracket not found on [{lo}, {hi}]")]
    BracketFailure { lo: f64, hi: f64 },

    #[error("linear algebra failure: {0}")]
    LinearAlgebra(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
