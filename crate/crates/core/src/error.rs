use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("singular 2x2 system (det = 0); raise lambda above zero")]
    Singular,

    #[error("invalid trit value {0}; expected -1, 0 or 1")]
    InvalidTrit(i64),

    #[error("invalid trit code 0b11 at element {index}")]
    InvalidTritCode { index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("corrupt header: {0}")]
    CorruptHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("scale {value} at index {index} does not fit in half precision")]
    ScaleOverflow { index: usize, value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
