use thiserror::Error;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("singular innovation matrix")]
    SingularInnovation,
    #[error("channel estimate on subcarrier {0} is rank deficient")]
    RankDeficient(usize),
    #[error("scheme carries no pilots")]
    NoPilots,
    #[error(transparent)]
    Encoder(#[from] encoders::EncoderError),
    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
}
