use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use tensor_core::rng::normal_vec;

use crate::error::FlowError;
use crate::VelocityField;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Gaussian `N(b, U diag(λ) Uᵀ)` with orthonormal `U` (d × r) and positive `λ`.
/// A rank below `d` means the component is supported on an affine subspace.
#[derive(Debug, Clone)]
pub struct GaussComponent {
    mean: DVector<f64>,
    basis: DMatrix<f64>,
    lambdas: DVector<f64>,
}

impl GaussComponent {
    /// From a full covariance; eigenvalues at or below `1e-12·λ_max` are dropped.
    pub fn from_covariance(mean: DVector<f64>, cov: &DMatrix<f64>) -> Result<Self, FlowError> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(FlowError::DimMismatch {
                expected: d,
                got: cov.nrows(),
            });
        }
        let sym = (cov + cov.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
        if eig.eigenvalues.iter().any(|&l| l < -1e-9 * max.max(1.0)) {
            return Err(FlowError::InvalidPrior("covariance is not PSD".into()));
        }
        let keep: Vec<usize> = (0..d)
            .filter(|&i| eig.eigenvalues[i] > 1e-12 * max)
            .collect();
        let basis = DMatrix::from_fn(d, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
        let lambdas = DVector::from_iterator(keep.len(), keep.iter().map(|&i| eig.eigenvalues[i]));
        Ok(Self {
            mean,
            basis,
            lambdas,
        })
    }

    /// Subspace-supported component `b + U diag(λ)^{1/2} z`.
    pub fn subspace(
        offset: DVector<f64>,
        basis: DMatrix<f64>,
        lambdas: DVector<f64>,
    ) -> Result<Self, FlowError> {
        let d = offset.len();
        if basis.nrows() != d || basis.ncols() != lambdas.len() {
            return Err(FlowError::DimMismatch {
                expected: d,
                got: basis.nrows(),
            });
        }
        if lambdas.iter().any(|&l| !(l > 0.0)) {
            return Err(FlowError::InvalidPrior(
                "subspace variances must be positive".into(),
            ));
        }
        let gram = basis.transpose() * &basis;
        let err = (gram - DMatrix::identity(lambdas.len(), lambdas.len())).amax();
        if err > 1e-10 {
            return Err(FlowError::InvalidPrior(format!(
                "basis not orthonormal (err {err:e})"
            )));
        }
        Ok(Self {
            mean: offset,
            basis,
            lambdas,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn rank(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_degenerate(&self) -> bool {
        self.rank() < self.dim()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn lambdas(&self) -> &DVector<f64> {
        &self.lambdas
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let scaled = DMatrix::from_fn(self.dim(), self.rank(), |r, c| {
            self.basis[(r, c)] * self.lambdas[c]
        });
        scaled * self.basis.transpose()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = normal_vec(rng, self.rank());
        let coef = DVector::from_iterator(
            self.rank(),
            z.iter().zip(self.lambdas.iter()).map(|(z, l)| z * l.sqrt()),
        );
        &self.mean + &self.basis * coef
    }

    /// Quantities of the smoothed marginal `N((1−τ)b, (1−τ)²Σ + τ²I)` at `x`.
    fn smoothed(&self, x: &DVector<f64>, tau: f64) -> Result<Smoothed, FlowError> {
        if tau == 0.0 && self.is_degenerate() {
            return Err(FlowError::ScoreUndefined);
        }
        let a = 1.0 - tau;
        let r = x - &self.mean * a;
        let proj = self.basis.tr_mul(&r);
        let den = self.lambdas.map(|l| a * a * l + tau * tau);
        let mut prec_r = &self.basis * proj.component_div(&den);
        let mut logdet: f64 = den.iter().map(|d| d.ln()).sum();
        if self.is_degenerate() {
            let normal = &r - &self.basis * &proj;
            prec_r += normal / (tau * tau);
            logdet += (self.dim() - self.rank()) as f64 * 2.0 * tau.ln();
        }
        let quad = r.dot(&prec_r);
        let shrink = self.lambdas.zip_map(&den, |l, d| l / d);
        let post_dev = &self.basis * proj.component_mul(&shrink) * a;
        Ok(Smoothed {
            log_density: -0.5 * (self.dim() as f64 * LN_2PI + logdet + quad),
            prec_r,
            post_mean: &self.mean + post_dev,
        })
    }

    /// `E[x1 − x0 | x(τ) = x]` of this component alone, `U[(τ − aλ)/den ∘ Uᵀr] − b`
    /// plus `(r − UUᵀr)/τ` off the support, with `a = 1 − τ` and `r = x − a·b`.
    fn velocity(&self, x: &DVector<f64>, tau: f64) -> Result<DVector<f64>, FlowError> {
        let degenerate = self.is_degenerate();
        if tau == 0.0 && degenerate {
            return Err(FlowError::ScoreUndefined);
        }
        let a = 1.0 - tau;
        let r = x - &self.mean * a;
        let proj = self.basis.tr_mul(&r);
        let coef = DVector::from_fn(self.rank(), |i, _| {
            let l = self.lambdas[i];
            let c = (tau - a * l) / (a * a * l + tau * tau);
            proj[i] * if degenerate { c - 1.0 / tau } else { c }
        });
        let mut v = &self.basis * coef - &self.mean;
        if degenerate {
            v += r / tau;
        }
        Ok(v)
    }
}

struct Smoothed {
    log_density: f64,
    /// `Σ_τ⁻¹ (x − (1−τ)b)`
    prec_r: DVector<f64>,
    /// `E[x0 | x(τ) = x]`
    post_mean: DVector<f64>,
}

/// Gaussian mixture prior over a real vector space.
#[derive(Debug, Clone)]
pub struct GmmPrior {
    weights: Vec<f64>,
    components: Vec<GaussComponent>,
}

impl GmmPrior {
    pub fn new(weights: Vec<f64>, components: Vec<GaussComponent>) -> Result<Self, FlowError> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(FlowError::InvalidPrior(
                "weights and components differ in count".into(),
            ));
        }
        if weights.iter().any(|&w| !(w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(FlowError::InvalidPrior(
                "weights must be positive and sum to 1".into(),
            ));
        }
        let d = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != d) {
            return Err(FlowError::DimMismatch {
                expected: d,
                got: c.dim(),
            });
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn gaussian(component: GaussComponent) -> Self {
        Self {
            weights: vec![1.0],
            components: vec![component],
        }
    }

    pub fn standard_normal(d: usize) -> Self {
        Self::gaussian(GaussComponent {
            mean: DVector::zeros(d),
            basis: DMatrix::identity(d, d),
            lambdas: DVector::from_element(d, 1.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussComponent] {
        &self.components
    }

    pub fn mean(&self) -> DVector<f64> {
        self.components
            .iter()
            .zip(&self.weights)
            .fold(DVector::zeros(self.dim()), |acc, (c, w)| {
                acc + c.mean() * *w
            })
    }

    /// Mixture covariance `Σ w_i (Σ_i + μ_i μ_iᵀ) − μ μᵀ`.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mu = self.mean();
        let mut cov = DMatrix::zeros(self.dim(), self.dim());
        for (c, w) in self.components.iter().zip(&self.weights) {
            cov += (c.covariance() + c.mean() * c.mean().transpose()) * *w;
        }
        cov - &mu * mu.transpose()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut idx = self.components.len() - 1;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                idx = i;
                break;
            }
        }
        self.components[idx].sample(rng).as_slice().to_vec()
    }

    fn check(&self, x: &[f64], tau: f64) -> Result<DVector<f64>, FlowError> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(FlowError::TauOutOfRange(tau));
        }
        if x.len() != self.dim() {
            return Err(FlowError::DimMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(DVector::from_column_slice(x))
    }

    fn evaluate(&self, x: &[f64], tau: f64) -> Result<(Vec<Smoothed>, Vec<f64>), FlowError> {
        let xv = self.check(x, tau)?;
        let parts = self
            .components
            .iter()
            .map(|c| c.smoothed(&xv, tau))
            .collect::<Result<Vec<_>, _>>()?;
        let logs: Vec<f64> = parts
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w.ln() + p.log_density)
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        let resp = logs.iter().map(|l| (l - max).exp() / sum).collect();
        Ok((parts, resp))
    }

    /// Log-density of the marginal of `x(τ)`.
    pub fn log_density(&self, x: &[f64], tau: f64) -> Result<f64, FlowError> {
        let xv = self.check(x, tau)?;
        let mut terms = Vec::with_capacity(self.components.len());
        for (c, w) in self.components.iter().zip(&self.weights) {
            terms.push(w.ln() + c.smoothed(&xv, tau)?.log_density);
        }
        let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Ok(max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln())
    }

    /// Component responsibilities `p(i | x(τ) = x)`.
    pub fn responsibilities(&self, x: &[f64], tau: f64) -> Result<Vec<f64>, FlowError> {
        self.evaluate(x, tau).map(|(_, r)| r)
    }

    /// Score `∇ log p_τ(x)` of the smoothed marginal.
    pub fn score(&self, x: &[f64], tau: f64) -> Result<Vec<f64>, FlowError> {
        let (parts, resp) = self.evaluate(x, tau)?;
        let mut out = DVector::zeros(self.dim());
        for (p, r) in parts.iter().zip(&resp) {
            out -= &p.prec_r * *r;
        }
        Ok(out.as_slice().to_vec())
    }

    /// Conditional mean `E[x0 | x(τ) = x]`.
    pub fn posterior_mean(&self, x: &[f64], tau: f64) -> Result<Vec<f64>, FlowError> {
        let (parts, resp) = self.evaluate(x, tau)?;
        let mut out = DVector::zeros(self.dim());
        for (p, r) in parts.iter().zip(&resp) {
            out += &p.post_mean * *r;
        }
        Ok(out.as_slice().to_vec())
    }

    /// Exact velocity `E[x1 − x0 | x(τ) = x]`, regular on the whole of `(0, 1]`.
    pub fn velocity_field(&self, x: &[f64], tau: f64) -> Result<Vec<f64>, FlowError> {
        if let [c] = self.components.as_slice() {
            return Ok(c.velocity(&self.check(x, tau)?, tau)?.as_slice().to_vec());
        }
        let (parts, resp) = self.evaluate(x, tau)?;
        let mut out = DVector::zeros(self.dim());
        for (p, r) in parts.iter().zip(&resp) {
            out += (&p.prec_r * tau - &p.post_mean) * *r;
        }
        Ok(out.as_slice().to_vec())
    }
}

impl VelocityField for GmmPrior {
    fn dim(&self) -> usize {
        GmmPrior::dim(self)
    }

    fn velocity(&self, x: &[f64], tau: f64) -> Result<Vec<f64>, FlowError> {
        self.velocity_field(x, tau)
    }

    /// `tr(Σ)/d` with `tr(Σ) = Σ w_i (Σλ_i + ‖μ_i‖²) − ‖μ‖²`.
    fn mean_variance(&self) -> f64 {
        let second: f64 = self
            .components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w * (c.lambdas.sum() + c.mean.norm_squared()))
            .sum();
        (second - self.mean().norm_squared()) / self.dim() as f64
    }
}
