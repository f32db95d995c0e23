use flow_priors::{GaussComponent, GmmPrior};
use nalgebra::{DMatrix, DVector};
use tensor_core::{CMatrix, C64};

use crate::error::ChannelError;

/// `R[i, j] = ρ^{|i−j|}`.
pub fn exponential_correlation(n: usize, rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| rho.powi((i as i32 - j as i32).abs()))
}

/// Covariance of `vec(H)` (index `f + n_f·(k + n_t·r)`) with exponential correlation
/// across subcarriers and receive antennas, independent transmitters: `R_r ⊗ I_{n_t} ⊗ R_f`.
pub fn kron_exponential_covariance(
    n_f: usize,
    n_t: usize,
    n_r: usize,
    rho_f: f64,
    rho_r: f64,
) -> CMatrix {
    let rf = exponential_correlation(n_f, rho_f);
    let rr = exponential_correlation(n_r, rho_r);
    let inner = DMatrix::<f64>::identity(n_t, n_t).kronecker(&rf);
    rr.kronecker(&inner).map(|v| C64::new(v, 0.0))
}

/// Real-embedded prior `[Re z; Im z]` of a circular `CN(0, C)`.
pub fn circular_gaussian_prior(cov: &CMatrix) -> Result<GmmPrior, ChannelError> {
    let n = cov.nrows();
    let mut real = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let c = cov[(i, j)];
            real[(i, j)] = 0.5 * c.re;
            real[(i, j + n)] = -0.5 * c.im;
            real[(i + n, j)] = 0.5 * c.im;
            real[(i + n, j + n)] = 0.5 * c.re;
        }
    }
    Ok(GmmPrior::gaussian(GaussComponent::from_covariance(
        DVector::zeros(2 * n),
        &real,
    )?))
}
