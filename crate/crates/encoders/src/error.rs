use thiserror::Error;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("source length {got} does not match encoder input {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("power overflow: codeword energy {energy:.3} exceeds {limit:.3}")]
    PowerOverflow { energy: f64, limit: f64 },
    #[error("encoder matrix is not full column rank")]
    RankDeficient,
    #[error("invalid encoder: {0}")]
    Invalid(String),
    #[error("pilot length alpha·t_s = {0} is not an integer")]
    NonIntegerPilotLength(f64),
    #[error("invalid pilot scheme: {0}")]
    InvalidScheme(String),
    #[error("transmitter {user} exceeds its budget ({energy:.3} > {limit:.3})")]
    BudgetViolation {
        user: usize,
        energy: f64,
        limit: f64,
    },
    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
    #[error(transparent)]
    Flow(#[from] flow_priors::FlowError),
}
