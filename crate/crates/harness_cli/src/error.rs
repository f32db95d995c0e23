use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{failed} of {total} trials failed at {point}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        point: String,
    },
    #[error("zero-norm reference in metric")]
    ZeroNorm,
    #[error(transparent)]
    Encoder(#[from] encoders::EncoderError),
    #[error(transparent)]
    Channel(#[from] channel_sim::ChannelError),
    #[error(transparent)]
    Flow(#[from] flow_priors::FlowError),
    #[error(transparent)]
    Pfm(#[from] pfm_decoder::PfmError),
    #[error(transparent)]
    Fim(#[from] fim_bcrb::FimError),
    #[error(transparent)]
    Baseline(#[from] baselines::BaselineError),
    #[error(transparent)]
    Tensor(#[from] tensor_core::TensorError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    /// Process exit code: 2 for configuration and I/O problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Io(_) | Self::Csv(_) | Self::Json(_) => 2,
            _ => 3,
        }
    }
}
