use channel_sim::ChannelTensor;
use flow_priors::VelocityField;
use serde::{Deserialize, Serialize};
use tensor_core::rng::{normal_vec, split_seed, stream_rng};
use tensor_core::{par, CTensor3};

use crate::error::PfmError;
use crate::likelihood::LikelihoodModel;
use crate::trace::TraceRow;

/// How the likelihood score enters the Euler update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Guidance {
    /// `x ← x − Δτ·V + (τΔτβ/(1−τ))·G`.
    Literal,
    /// Literal coefficient times `w(τ) = c·σ²/(σ² + 2·v·λ̄)`, where for a prior of mean
    /// variance `s²`: `c = (1−τ)s²/den`, `v = s²τ²/den`, `den = (1−τ)²s² + τ²`, and `λ̄`
    /// is the mean eigenvalue of the variable's observation operator at the Tweedie point.
    #[default]
    Weighted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfmConfig {
    pub delta_tau: f64,
    pub beta_h: f64,
    pub beta_s: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub guidance: Guidance,
    /// Number of independent posterior samples averaged into the estimate.
    #[serde(default = "one")]
    pub n_avg: usize,
}

fn one() -> usize {
    1
}

impl PfmConfig {
    pub fn new(delta_tau: f64, beta_h: f64, beta_s: Vec<f64>, seed: u64) -> Self {
        Self {
            delta_tau,
            beta_h,
            beta_s,
            seed,
            guidance: Guidance::default(),
            n_avg: 1,
        }
    }

    /// Number of Euler steps `1/Δτ`.
    pub fn n_steps(&self) -> Result<usize, PfmError> {
        if !(self.delta_tau > 0.0 && self.delta_tau <= 1.0) {
            return Err(PfmError::InvalidConfig(format!(
                "delta_tau = {} not in (0, 1]",
                self.delta_tau
            )));
        }
        let n = (1.0 / self.delta_tau).round();
        if (n * self.delta_tau - 1.0).abs() > 1e-9 {
            return Err(PfmError::InvalidConfig(format!(
                "1/delta_tau = {} is not an integer",
                1.0 / self.delta_tau
            )));
        }
        Ok(n as usize)
    }

    pub fn validate(&self, n_sources: usize) -> Result<usize, PfmError> {
        let n = self.n_steps()?;
        if self.beta_s.len() != n_sources {
            return Err(PfmError::InvalidConfig(format!(
                "{} beta_s for {n_sources} sources",
                self.beta_s.len()
            )));
        }
        if std::iter::once(&self.beta_h)
            .chain(&self.beta_s)
            .any(|b| !(b.is_finite() && *b >= 0.0))
        {
            return Err(PfmError::InvalidConfig(
                "beta values must be finite and non-negative".into(),
            ));
        }
        if self.n_avg == 0 {
            return Err(PfmError::InvalidConfig("n_avg must be at least 1".into()));
        }
        Ok(n)
    }
}

/// Prior velocity fields for the channel and each source.
#[derive(Clone, Copy)]
pub struct PfmPriors<'a> {
    pub h: &'a dyn VelocityField,
    pub s: &'a [&'a dyn VelocityField],
}

/// Ground truth for trace diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct Truth<'a> {
    pub h: &'a ChannelTensor,
    pub x: &'a CTensor3,
}

/// Flow variables on their real embeddings at time `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub h_tau: Vec<f64>,
    pub s_tau: Vec<Vec<f64>>,
    pub tau: f64,
}

/// Quantities shared by every update of one step.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub h_hat: Vec<f64>,
    pub s_hat: Vec<Vec<f64>>,
    pub residual_norm: f64,
}

#[derive(Debug, Clone)]
pub struct PfmOutput {
    pub h: ChannelTensor,
    pub s: Vec<Vec<f64>>,
    pub trace: Vec<TraceRow>,
    /// Velocity-field evaluations per variable in one posterior sample.
    pub nfe: usize,
}

fn check_finite(v: &[f64], step: usize, tau: f64) -> Result<(), PfmError> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(PfmError::NonFinite { step, tau })
    }
}

fn guidance_weight(s2: f64, tau: f64, noise_var: f64, lbar: f64) -> f64 {
    let den = (1.0 - tau).powi(2) * s2 + tau * tau;
    let c = (1.0 - tau) * s2 / den;
    let v = s2 * tau * tau / den;
    c * noise_var / (noise_var + 2.0 * v * lbar)
}

/// One Euler step from `state.tau` to `state.tau − Δτ`.
///
/// All velocity fields are evaluated first, then Tweedie estimates and likelihood scores
/// are formed once and shared by every variable update. The step at `τ = 1` applies no
/// guidance.
pub fn pfm_step(
    state: &FlowState,
    lm: &LikelihoodModel,
    priors: PfmPriors<'_>,
    cfg: &PfmConfig,
    step: usize,
) -> Result<(FlowState, StepInfo), PfmError> {
    let tau = state.tau;
    if !(tau > 0.0 && tau <= 1.0) {
        return Err(PfmError::InvalidConfig(format!(
            "tau = {tau} outside (0, 1]"
        )));
    }
    let dt = 1.0 / cfg.n_steps()? as f64;
    let ns = state.s_tau.len();
    if priors.s.len() != ns || cfg.beta_s.len() != ns {
        return Err(PfmError::ShapeMismatch(
            "source count differs between state, priors and config".into(),
        ));
    }

    let velocities = par::map_indexed(ns + 1, |i| {
        if i == 0 {
            priors.h.velocity(&state.h_tau, tau)
        } else {
            priors.s[i - 1].velocity(&state.s_tau[i - 1], tau)
        }
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    for v in &velocities {
        check_finite(v, step, tau)?;
    }

    let tweedie = |x: &[f64], v: &[f64]| {
        x.iter()
            .zip(v)
            .map(|(a, b)| a - tau * b)
            .collect::<Vec<f64>>()
    };
    let h_hat = tweedie(&state.h_tau, &velocities[0]);
    let s_hat: Vec<Vec<f64>> = (0..ns)
        .map(|k| tweedie(&state.s_tau[k], &velocities[k + 1]))
        .collect();

    let shape = lm.dims.channel_shape();
    let h_hat_t =
        ChannelTensor::from_real(shape, &h_hat).map_err(|_| PfmError::NonFinite { step, tau })?;
    let scores = lm.scores(&h_hat_t.h, &s_hat)?;
    check_finite(&scores.h, step, tau)?;
    for g in &scores.s {
        check_finite(g, step, tau)?;
    }

    let base = if tau >= 1.0 {
        0.0
    } else {
        tau * dt / (1.0 - tau)
    };
    let (w_h, w_s): (f64, Vec<f64>) = match cfg.guidance {
        Guidance::Literal => (1.0, vec![1.0; ns]),
        Guidance::Weighted if base == 0.0 => (0.0, vec![0.0; ns]),
        Guidance::Weighted => {
            let x_hat = lm.transmit_block(&s_hat)?;
            let nv = lm.noise_var;
            let wh = guidance_weight(priors.h.mean_variance(), tau, nv, lm.channel_gain(&x_hat));
            let ws = (0..ns)
                .map(|k| {
                    guidance_weight(
                        priors.s[k].mean_variance(),
                        tau,
                        nv,
                        lm.source_gain(&h_hat_t.h, k),
                    )
                })
                .collect();
            (wh, ws)
        }
    };

    let update = |x: &[f64], v: &[f64], g: &[f64], coef: f64| -> Vec<f64> {
        x.iter()
            .zip(v)
            .zip(g)
            .map(|((xi, vi), gi)| xi - dt * vi + coef * gi)
            .collect()
    };
    let h_next = update(
        &state.h_tau,
        &velocities[0],
        &scores.h,
        base * cfg.beta_h * w_h,
    );
    let s_next: Vec<Vec<f64>> = (0..ns)
        .map(|k| {
            update(
                &state.s_tau[k],
                &velocities[k + 1],
                &scores.s[k],
                base * cfg.beta_s[k] * w_s[k],
            )
        })
        .collect();
    check_finite(&h_next, step, tau)?;
    for s in &s_next {
        check_finite(s, step, tau)?;
    }
    let n = cfg.n_steps()?;
    let next_tau = (n as f64 * tau - 1.0).round().max(0.0) / n as f64;
    Ok((
        FlowState {
            h_tau: h_next,
            s_tau: s_next,
            tau: next_tau,
        },
        StepInfo {
            h_hat,
            s_hat,
            residual_norm: scores.residual_norm,
        },
    ))
}

fn nmse_db(est: &CTensor3, truth: &CTensor3) -> f64 {
    let ratio = est.sub(truth).norm_sqr() / truth.norm_sqr();
    (10.0 * ratio.log10()).max(-120.0)
}

fn decode_once(
    lm: &LikelihoodModel,
    priors: PfmPriors<'_>,
    cfg: &PfmConfig,
    seed: u64,
    truth: Option<Truth<'_>>,
) -> Result<(FlowState, Vec<TraceRow>, usize), PfmError> {
    let n = cfg.validate(priors.s.len())?;
    let src_dims = lm.source_dims();
    if src_dims.len() != priors.s.len() {
        return Err(PfmError::ShapeMismatch(format!(
            "{} source priors for {} sources",
            priors.s.len(),
            src_dims.len()
        )));
    }
    if priors.h.dim() != lm.dims.channel_real_dim() {
        return Err(PfmError::ShapeMismatch("channel prior dimension".into()));
    }
    if priors.s.iter().zip(&src_dims).any(|(p, m)| p.dim() != *m) {
        return Err(PfmError::ShapeMismatch("source prior dimension".into()));
    }
    let mut rng = stream_rng(seed, 0);
    let mut state = FlowState {
        h_tau: normal_vec(&mut rng, priors.h.dim()),
        s_tau: src_dims.iter().map(|m| normal_vec(&mut rng, *m)).collect(),
        tau: 1.0,
    };
    let mut trace = Vec::with_capacity(n);
    for step in 0..n {
        let tau = state.tau;
        let (next, info) = pfm_step(&state, lm, priors, cfg, step)?;
        let (nh, nx) = match truth {
            Some(t) => {
                let h_hat = ChannelTensor::from_real(lm.dims.channel_shape(), &info.h_hat)?;
                let x_hat = lm.transmit_block(&info.s_hat)?;
                (Some(nmse_db(&h_hat.h, &t.h.h)), Some(nmse_db(&x_hat, t.x)))
            }
            None => (None, None),
        };
        trace.push(TraceRow {
            step,
            tau,
            residual_norm: info.residual_norm,
            nmse_h_vs_truth: nh,
            nmse_x_vs_truth: nx,
        });
        state = next;
    }
    Ok((state, trace, n))
}

/// Runs the full reverse integration from Gaussian noise at `τ = 1` and returns the final
/// Euler iterate. With `n_avg > 1` the estimate is the mean of independent samples drawn
/// with seeds split from `cfg.seed`; the trace then belongs to the first sample.
pub fn pfm_decode(
    lm: &LikelihoodModel,
    priors: PfmPriors<'_>,
    cfg: &PfmConfig,
    truth: Option<Truth<'_>>,
) -> Result<PfmOutput, PfmError> {
    cfg.validate(priors.s.len())?;
    let runs = if cfg.n_avg == 1 {
        vec![decode_once(lm, priors, cfg, cfg.seed, truth)]
    } else {
        par::map_indexed(cfg.n_avg, |r| {
            decode_once(
                lm,
                priors,
                cfg,
                split_seed(cfg.seed, r as u64),
                if r == 0 { truth } else { None },
            )
        })
    };
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let inv = 1.0 / runs.len() as f64;
    let mut h = vec![0.0; runs[0].0.h_tau.len()];
    let mut s: Vec<Vec<f64>> = runs[0].0.s_tau.iter().map(|v| vec![0.0; v.len()]).collect();
    for (state, _, _) in &runs {
        for (a, b) in h.iter_mut().zip(&state.h_tau) {
            *a += inv * b;
        }
        for (sk, st) in s.iter_mut().zip(&state.s_tau) {
            for (a, b) in sk.iter_mut().zip(st) {
                *a += inv * b;
            }
        }
    }
    let (_, trace, nfe) = runs.into_iter().next().expect("at least one run");
    Ok(PfmOutput {
        h: ChannelTensor::from_real(lm.dims.channel_shape(), &h)?,
        s,
        trace,
        nfe,
    })
}
