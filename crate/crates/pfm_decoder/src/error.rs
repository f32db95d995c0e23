use thiserror::Error;

#[derive(Debug, Error)]
pub enum PfmError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("non-finite value at step {step} (tau = {tau})")]
    NonFinite { step: usize, tau: f64 },
    #[error(transparent)]
    Flow(#[from] flow_priors::FlowError),
    #[error(transparent)]
    Encoder(#[from] encoders::EncoderError),
    #[error(transparent)]
    Channel(#[from] channel_sim::ChannelError),
    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}
