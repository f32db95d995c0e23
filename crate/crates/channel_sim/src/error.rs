use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChannelError {
    #[error("invalid dims: {0}")]
    InvalidDims(String),
    #[error("prior dimension {got} does not match 2·n_f·n_t·n_r = {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("CSNR undefined: zero noise realization")]
    CsnrUndefined,
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error(transparent)]
    Flow(#[from] flow_priors::FlowError),
    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
}
