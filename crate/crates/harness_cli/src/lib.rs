//! Experiment orchestration: configuration, seeded sweeps over pilot schemes, channel-use
//! ratios and CSNR, metrics, bound evaluation and result files.

pub mod bound;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod output;
pub mod rank;
pub mod sweep;

pub use config::{ExperimentConfig, SchemeSpec};
pub use error::HarnessError;
pub use experiment::{Experiment, Series, TrialData};
pub use metrics::{channel_bandwidth_ratio, compute_metrics, Metrics, Outcome, NMSE_FLOOR_DB};
pub use sweep::{run_sweep, AggregateRow, SweepOptions, SweepOutput};
