use flow_priors::{GaussComponent, GmmPrior};
use nalgebra::{DMatrix, DVector};
use tensor_core::rng::{normal_vec, stream_rng};

use crate::error::EncoderError;

/// Source prior on a `d`-dimensional affine subspace of `R^m`: `s = b + U·√λ·z`.
/// `U` is a seeded random orthonormal basis and `b` is the all-ones direction projected
/// onto the orthogonal complement of `U`, rescaled to `‖b‖² = m·offset_energy`.
pub fn subspace_source_prior(
    m: usize,
    d: usize,
    lambda: f64,
    offset_energy: f64,
    seed: u64,
) -> Result<GmmPrior, EncoderError> {
    if d == 0 || d > m {
        return Err(EncoderError::Invalid(format!(
            "subspace dimension {d} not in 1..={m}"
        )));
    }
    let mut rng = stream_rng(seed, 3);
    let u = DMatrix::from_vec(m, d, normal_vec(&mut rng, m * d))
        .qr()
        .q();
    let lambdas = DVector::from_element(d, lambda);
    let mut b = DVector::from_element(m, 1.0);
    b -= &u * (u.transpose() * &b);
    let nb = b.norm();
    let b = if offset_energy == 0.0 || nb < 1e-12 {
        DVector::zeros(m)
    } else {
        b * ((m as f64 * offset_energy).sqrt() / nb)
    };
    Ok(GmmPrior::gaussian(GaussComponent::subspace(b, u, lambdas)?))
}

/// `E‖s‖²` under a prior: `tr Σ + ‖μ‖²`.
pub fn source_energy(prior: &GmmPrior) -> f64 {
    prior.covariance().trace() + prior.mean().norm_squared()
}
