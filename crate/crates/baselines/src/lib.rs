//! Separate-estimation references: known-covariance LMMSE channel estimation from pilots
//! followed by least-squares data detection.
//!
//! Channel vectors follow the tensor layout `vec(H)[f + n_f(k + n_t r)]`; pilot
//! observations follow `vec(Y_p)[f + n_f(t + T_p r)]`.

pub mod error;
pub mod lmmse;
pub mod pipeline;

pub use error::BaselineError;
pub use lmmse::{ls_detect, pilot_observation, pilot_operator, LmmseEstimator};
pub use pipeline::{separate_estimate, SeparateEstimate};
