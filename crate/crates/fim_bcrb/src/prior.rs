use flow_priors::GmmPrior;
use nalgebra::DMatrix;
use tensor_core::rng::{normal_vec, stream_rng, SimRng};
use tensor_core::{par, CMatrix, C64};

use crate::error::FimError;

const CHUNK: usize = 1024;

/// Wirtinger score `∇_{z*} = ½(g_re + i·g_im)` from a stacked real gradient.
pub fn wirtinger_from_real(g: &[f64]) -> Vec<C64> {
    let n = g.len() / 2;
    (0..n)
        .map(|i| C64::new(0.5 * g[i], 0.5 * g[n + i]))
        .collect()
}

fn check_eps(eps: f64) -> Result<(), FimError> {
    if eps > 0.0 && eps < 1.0 {
        Ok(())
    } else {
        Err(FimError::Invalid(format!("eps = {eps} not in (0, 1)")))
    }
}

/// Monte-Carlo `E[s sᴴ]` of the Wirtinger score of the ε-smoothed variable
/// `(1−ε)·x0 + ε·n`, with `x0` from `sampler` and `n ~ N(0, I)`.
///
/// Samples are drawn in fixed chunks of 1024 with per-chunk streams and summed in chunk
/// order, so the result depends only on `(seed, n_samples)`.
pub fn prior_fim<S, D>(
    score_fn: S,
    sampler: D,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CMatrix, FimError>
where
    S: Fn(&[f64], f64) -> Result<Vec<f64>, flow_priors::FlowError> + Sync + Send,
    D: Fn(&mut SimRng) -> Vec<f64> + Sync + Send,
{
    check_eps(eps)?;
    if n_samples == 0 {
        return Err(FimError::Invalid("n_samples must be positive".into()));
    }
    let n_chunks = n_samples.div_ceil(CHUNK);
    let partial = par::map_indexed(n_chunks, |c| -> Result<CMatrix, FimError> {
        let mut rng = stream_rng(seed, c as u64);
        let count = CHUNK.min(n_samples - c * CHUNK);
        let mut acc: Option<CMatrix> = None;
        for i in 0..count {
            let x0 = sampler(&mut rng);
            let noise = normal_vec(&mut rng, x0.len());
            let x: Vec<f64> = x0
                .iter()
                .zip(&noise)
                .map(|(a, b)| (1.0 - eps) * a + eps * b)
                .collect();
            let g = score_fn(&x, eps)?;
            if g.len() != x.len() || g.iter().any(|v| !v.is_finite()) {
                return Err(FimError::NonFiniteScore(c * CHUNK + i));
            }
            let s = nalgebra::DVector::from_vec(wirtinger_from_real(&g));
            let outer = &s * s.adjoint();
            match acc.as_mut() {
                Some(a) => *a += outer,
                None => acc = Some(outer),
            }
        }
        Ok(acc.expect("chunk is non-empty"))
    });
    let mut total: Option<CMatrix> = None;
    for p in partial {
        let p = p?;
        match total.as_mut() {
            Some(t) => *t += p,
            None => total = Some(p),
        }
    }
    let f = total.expect("at least one chunk") / C64::new(n_samples as f64, 0.0);
    Ok(crate::fim::hermitize(&f))
}

/// [`prior_fim`] with the exact smoothed score of a Gaussian mixture.
pub fn prior_fim_gmm(
    prior: &GmmPrior,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CMatrix, FimError> {
    prior_fim(
        |x, t| prior.score(x, t),
        |rng| prior.sample(rng),
        eps,
        n_samples,
        seed,
    )
}

/// Wirtinger FIM of a Gaussian with real covariance `Σ_r` on the stacked embedding:
/// `¼[(P_rr + P_ii) + i(P_ir − P_ri)]` with `P = Σ_r⁻¹`. Non-circular structure is
/// discarded, which keeps the resulting bound valid.
pub fn gaussian_prior_fim(real_cov: &DMatrix<f64>) -> Result<CMatrix, FimError> {
    let d = real_cov.nrows();
    if !d.is_multiple_of(2) || real_cov.ncols() != d {
        return Err(FimError::ShapeMismatch(format!(
            "real covariance is {}x{}",
            d,
            real_cov.ncols()
        )));
    }
    let p = real_cov
        .clone()
        .try_inverse()
        .ok_or_else(|| FimError::Invalid("singular covariance".into()))?;
    let n = d / 2;
    Ok(CMatrix::from_fn(n, n, |i, j| {
        C64::new(
            0.25 * (p[(i, j)] + p[(n + i, n + j)]),
            0.25 * (p[(n + i, j)] - p[(i, n + j)]),
        )
    }))
}

/// [`gaussian_prior_fim`] of the ε-smoothed variable, covariance `(1−ε)²Σ_r + ε²I`.
pub fn smoothed_gaussian_prior_fim(real_cov: &DMatrix<f64>, eps: f64) -> Result<CMatrix, FimError> {
    check_eps(eps)?;
    let d = real_cov.nrows();
    gaussian_prior_fim(&(real_cov * (1.0 - eps).powi(2) + DMatrix::identity(d, d) * (eps * eps)))
}

/// Real precision `((1−ε)²Σ_r + ε²I)⁻¹` of the ε-smoothed variable, keeping any
/// non-circular structure of `Σ_r`.
pub fn smoothed_real_precision(
    real_cov: &DMatrix<f64>,
    eps: f64,
) -> Result<DMatrix<f64>, FimError> {
    check_eps(eps)?;
    let d = real_cov.nrows();
    if real_cov.ncols() != d {
        return Err(FimError::ShapeMismatch(format!(
            "real covariance is {}x{}",
            d,
            real_cov.ncols()
        )));
    }
    (real_cov * (1.0 - eps).powi(2) + DMatrix::identity(d, d) * (eps * eps))
        .try_inverse()
        .ok_or_else(|| FimError::Invalid("singular covariance".into()))
}
