use thiserror::Error;

#[derive(Debug, Error)]
pub enum FimError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("empty ensemble")]
    EmptyEnsemble,
    #[error("non-finite score at sample {0}")]
    NonFiniteScore(usize),
    #[error("singular BFIM: min eigenvalue {min_eig:e}, max {max_eig:e}, {null_dim} near-null directions")]
    Singular {
        min_eig: f64,
        max_eig: f64,
        null_dim: usize,
    },
    #[error("ill-conditioned BFIM (condition number {0:e})")]
    IllConditioned(f64),
    #[error("tangent space unavailable: {0}")]
    TangentUnavailable(String),
    #[error(transparent)]
    Flow(#[from] flow_priors::FlowError),
}
