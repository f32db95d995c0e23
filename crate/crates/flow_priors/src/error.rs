use thiserror::Error;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("tau {0} outside [0, 1]")]
    TauOutOfRange(f64),
    #[error("tau {0} is singular for this conversion")]
    SingularTau(f64),
    #[error("score undefined on manifold at tau = 0")]
    ScoreUndefined,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("training diverged at step {step} (loss {loss})")]
    Divergence { step: usize, loss: f64 },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
}
