//! Parallel flow-matching posterior sampling for joint channel and source estimation.
//!
//! Every Euler step evaluates the prior velocity fields, forms Tweedie estimates of all
//! variables, computes likelihood scores at those estimates and updates the channel and
//! every source from the same pre-step quantities.

pub mod error;
pub mod likelihood;
pub mod sampler;
pub mod trace;

pub use error::PfmError;
pub use likelihood::{LikelihoodModel, TransmitModel};
pub use sampler::{
    pfm_decode, pfm_step, FlowState, Guidance, PfmConfig, PfmOutput, PfmPriors, StepInfo, Truth,
};
pub use trace::{write_trace_csv, TraceRow};
