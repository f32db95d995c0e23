use rand::Rng;
use tensor_core::rng::{normal_vec, stream_rng};

use crate::error::FlowError;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub x_tau: Vec<f64>,
    pub tau: f64,
}

fn check_tau(tau: f64) -> Result<(), FlowError> {
    if (0.0..=1.0).contains(&tau) {
        Ok(())
    } else {
        Err(FlowError::TauOutOfRange(tau))
    }
}

/// `(1−τ)·x0 + τ·x1` with `x1` drawn from stream 0 of `seed`.
pub fn ot_path_sample(x0: &[f64], tau: f64, seed: u64) -> Result<FlowSample, FlowError> {
    let mut rng = stream_rng(seed, 0);
    ot_path_sample_with(x0, tau, &mut rng).map(|(s, _)| s)
}

/// Same as [`ot_path_sample`] with an explicit generator; also returns the noise endpoint.
pub fn ot_path_sample_with<R: Rng + ?Sized>(
    x0: &[f64],
    tau: f64,
    rng: &mut R,
) -> Result<(FlowSample, Vec<f64>), FlowError> {
    check_tau(tau)?;
    let x1 = normal_vec(rng, x0.len());
    let x_tau = if tau == 0.0 {
        x0.to_vec()
    } else if tau == 1.0 {
        x1.clone()
    } else {
        x0.iter()
            .zip(&x1)
            .map(|(a, b)| (1.0 - tau) * a + tau * b)
            .collect()
    };
    Ok((FlowSample { x_tau, tau }, x1))
}

/// `V = (x + τ·score)/(τ − 1)`.
pub fn vf_from_score(fs: &FlowSample, score: &[f64]) -> Result<Vec<f64>, FlowError> {
    check_tau(fs.tau)?;
    if fs.tau == 1.0 {
        return Err(FlowError::SingularTau(1.0));
    }
    let d = fs.tau - 1.0;
    Ok(fs
        .x_tau
        .iter()
        .zip(score)
        .map(|(x, s)| (x + fs.tau * s) / d)
        .collect())
}

/// `score = ((τ − 1)·V − x)/τ`.
pub fn score_from_vf(fs: &FlowSample, vf: &[f64]) -> Result<Vec<f64>, FlowError> {
    check_tau(fs.tau)?;
    if fs.tau == 0.0 {
        return Err(FlowError::SingularTau(0.0));
    }
    let t = fs.tau;
    Ok(fs
        .x_tau
        .iter()
        .zip(vf)
        .map(|(x, v)| ((t - 1.0) * v - x) / t)
        .collect())
}

/// `x̂(0|τ) = x(τ) − τ·V(x(τ))`.
pub fn tweedie_mmse(fs: &FlowSample, vf: &[f64]) -> Vec<f64> {
    fs.x_tau
        .iter()
        .zip(vf)
        .map(|(x, v)| x - fs.tau * v)
        .collect()
}
