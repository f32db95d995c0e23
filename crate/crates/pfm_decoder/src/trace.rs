use std::io::Write;

use serde::Serialize;

use crate::error::PfmError;

/// One Euler step of a decode, evaluated at the Tweedie estimates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceRow {
    pub step: usize,
    pub tau: f64,
    pub residual_norm: f64,
    pub nmse_h_vs_truth: Option<f64>,
    pub nmse_x_vs_truth: Option<f64>,
}

/// CSV columns `step,tau,residual_norm,nmse_h_vs_truth,nmse_x_vs_truth`.
pub fn write_trace_csv<W: Write>(rows: &[TraceRow], out: W) -> Result<(), PfmError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
