//! Linear optimal-transport flow paths, closed-form Gaussian-mixture scores and
//! velocity fields, and a small MLP velocity field trained by conditional flow matching.
//!
//! Path convention: `x(τ) = (1−τ)·x0 + τ·x1` with `x1 ~ N(0, I)`; `τ = 1` is pure noise.

pub mod error;
pub mod gmm;
pub mod mlp;
pub mod path;

pub use error::FlowError;
pub use gmm::{GaussComponent, GmmPrior};
pub use mlp::{cfm_train, score_error, Activation, MlpVf, TrainConfig, TrainReport};
pub use path::{ot_path_sample, score_from_vf, tweedie_mmse, vf_from_score, FlowSample};

/// A prior velocity field `V(x, τ)` on the real embedding.
pub trait VelocityField: Send + Sync {
    fn dim(&self) -> usize;
    fn velocity(&self, x: &[f64], tau: f64) -> Result<Vec<f64>, FlowError>;
    /// Average per-coordinate prior variance, used to weight likelihood guidance.
    fn mean_variance(&self) -> f64;
}
