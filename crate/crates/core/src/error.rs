use thiserror::Error;

/// Errors raised by the tensor, moment and relaxation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("index {index} out of range 1..={dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("multi-index of degree {degree} outside basis degree range {min}..={max}")]
    DegreeOutOfRange { degree: u32, min: u32, max: u32 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("tuple {tuple:?} has {found} indices, tensor order is {order}")]
    WrongTupleLength {
        tuple: Vec<usize>,
        order: usize,
        found: usize,
    },

    #[error("conflicting values for symmetric entry {tuple:?}: {existing} vs {value}")]
    ConflictingEntry {
        tuple: Vec<usize>,
        existing: f64,
        value: f64,
    },

    #[error("vector {index} has negative entry {value}")]
    NegativeEntry { index: usize, value: f64 },

    #[error("non-finite value {value} at position {position}")]
    NonFinite { position: usize, value: f64 },

    #[error("invalid degree: {0}")]
    InvalidDegree(String),

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error("certificate does not match program: {0}")]
    CertificateShape(String),
}

pub type Result<T> = std::result::Result<T, Error>;
