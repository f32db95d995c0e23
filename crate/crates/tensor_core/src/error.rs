use thiserror::Error;

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("data length {got} does not match dims {dims:?} (expected {expected})")]
    LengthMismatch {
        dims: (usize, usize, usize),
        expected: usize,
        got: usize,
    },
    #[error("non-finite entry at flat index {0}")]
    NonFinite(usize),
    #[error("real and imaginary parts differ in length ({re} vs {im})")]
    IsoLength { re: usize, im: usize },
    #[error("direct sum needs at least one block")]
    EmptyDirectSum,
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed tensor file: {0}")]
    Format(String),
    #[error("json header: {0}")]
    Json(#[from] serde_json::Error),
}
