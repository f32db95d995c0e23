use flow_priors::{score_error, score_from_vf, FlowSample, GmmPrior, VelocityField};
use nalgebra::DVector;
use serde::Serialize;
use tensor_core::rng::{normal_vec, stream_rng};

use crate::error::FimError;

/// Tangent-projected smoothing error at one level `ε`.
#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticRow {
    pub eps: f64,
    /// `E‖P_T(s_ε(x(ε))) − P_T(∇log p(x0))‖₂`.
    pub projected_error: f64,
    /// Mean over samples of `error / (ε‖x1 − x0‖)`.
    pub per_sample_constant: f64,
    /// `E[error] / (ε·E‖x1 − x0‖)`.
    pub averaged_constant: f64,
    /// Score-training term `ε·E‖s_net − s_exact‖` (zero for the exact score).
    pub delta: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DiagnosticsTable {
    pub rows: Vec<DiagnosticRow>,
    /// Log-log slope of `projected_error` against `ε` over the positive levels.
    pub slope: Option<f64>,
}

/// Smoothing-error diagnostics for a single-component prior with explicit support
/// `μ + span(U)`, using `score` (exact or learned) through its velocity field.
pub fn appendix_b_diagnostics(
    prior: &GmmPrior,
    score: &dyn VelocityField,
    eps_list: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<DiagnosticsTable, FimError> {
    let [comp] = prior.components() else {
        return Err(FimError::TangentUnavailable(
            "prior has more than one component".into(),
        ));
    };
    if score.dim() != prior.dim() {
        return Err(FimError::ShapeMismatch(
            "score and prior dimensions differ".into(),
        ));
    }
    let u = comp.basis();
    let lam = comp.lambdas();
    let mu = comp.mean();
    let project = |v: &DVector<f64>| u * (u.transpose() * v);
    let mut rows = Vec::with_capacity(eps_list.len());
    for (idx, &eps) in eps_list.iter().enumerate() {
        if !(0.0..1.0).contains(&eps) {
            return Err(FimError::Invalid(format!("eps = {eps} not in [0, 1)")));
        }
        if eps == 0.0 {
            rows.push(DiagnosticRow {
                eps,
                projected_error: 0.0,
                per_sample_constant: 0.0,
                averaged_constant: 0.0,
                delta: 0.0,
            });
            continue;
        }
        let mut rng = stream_rng(seed, idx as u64);
        let (mut err_sum, mut ratio_sum, mut gap_sum) = (0.0, 0.0, 0.0);
        for _ in 0..n_samples {
            let x0 = DVector::from_vec(prior.sample(&mut rng));
            let x1 = DVector::from_vec(normal_vec(&mut rng, x0.len()));
            let xe = &x0 * (1.0 - eps) + &x1 * eps;
            let fs = FlowSample {
                x_tau: xe.as_slice().to_vec(),
                tau: eps,
            };
            let s_eps = DVector::from_vec(score_from_vf(&fs, &score.velocity(&fs.x_tau, eps)?)?);
            let coords = u.transpose() * (&x0 - mu);
            let clean = -(u * coords.component_div(lam));
            let err = (project(&s_eps) - project(&clean)).norm();
            let gap = (&x1 - &x0).norm();
            err_sum += err;
            ratio_sum += err / (eps * gap);
            gap_sum += gap;
        }
        let n = n_samples as f64;
        let delta = score_error(score, prior, eps, n_samples, seed)?;
        rows.push(DiagnosticRow {
            eps,
            projected_error: err_sum / n,
            per_sample_constant: ratio_sum / n,
            averaged_constant: err_sum / (eps * gap_sum),
            delta,
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.eps > 0.0 && r.projected_error > 0.0)
        .map(|r| (r.eps.ln(), r.projected_error.ln()))
        .collect();
    let slope = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / pts.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
    });
    Ok(DiagnosticsTable { rows, slope })
}
