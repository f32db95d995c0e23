use channel_sim::ChannelTensor;
use encoders::{PilotKind, PilotScheme};
use nalgebra::DVector;
use tensor_core::{CMatrix, CTensor3, C64};

use crate::error::BaselineError;

/// LMMSE channel estimator with known channel covariance.
#[derive(Debug, Clone)]
pub struct LmmseEstimator {
    pub channel_covariance: CMatrix,
    pub pilot_matrix: CMatrix,
    pub noise_var: f64,
}

/// Observation operator `A` mapping `vec(H)` to `vec(Y_p)` for per-subcarrier pilots
/// `P_f` (`T_p × n_t`): `Y_p[f,t,r] = Σ_k P_f[t,k]·H[f,k,r]`.
pub fn pilot_operator(pilots: &[CMatrix], n_r: usize) -> Result<CMatrix, BaselineError> {
    let n_f = pilots.len();
    let (tp, n_t) = pilots
        .first()
        .map(|p| p.shape())
        .ok_or(BaselineError::NoPilots)?;
    if pilots.iter().any(|p| p.shape() != (tp, n_t)) {
        return Err(BaselineError::ShapeMismatch(
            "pilot matrices differ in shape".into(),
        ));
    }
    let mut a = CMatrix::zeros(n_f * tp * n_r, n_f * n_t * n_r);
    for r in 0..n_r {
        for (f, p) in pilots.iter().enumerate() {
            for k in 0..n_t {
                for t in 0..tp {
                    a[(f + n_f * (t + tp * r), f + n_f * (k + n_t * r))] = p[(t, k)];
                }
            }
        }
    }
    Ok(a)
}

/// Pilot-bearing part of `Y` and its effective pilot matrices. Orthogonal schemes use the
/// leading pilot symbols; superimposed schemes use the whole block with pilots scaled by
/// `√ρ`.
pub fn pilot_observation(
    y: &CTensor3,
    scheme: &PilotScheme,
) -> Result<(CTensor3, Vec<CMatrix>), BaselineError> {
    let (n_f, t_s, n_r) = y.dims();
    match scheme.kind {
        PilotKind::None => Err(BaselineError::NoPilots),
        PilotKind::Orthogonal => {
            let tp = scheme.pilot_symbols();
            if tp > t_s {
                return Err(BaselineError::ShapeMismatch(
                    "pilot length exceeds block".into(),
                ));
            }
            Ok((
                CTensor3::from_fn((n_f, tp, n_r), |f, t, r| y.get(f, t, r)),
                scheme.pilots.clone(),
            ))
        }
        PilotKind::Superimposed => {
            let a = C64::new(scheme.pilot_power_fraction.sqrt(), 0.0);
            Ok((y.clone(), scheme.pilots.iter().map(|p| p * a).collect()))
        }
    }
}

impl LmmseEstimator {
    pub fn new(
        channel_covariance: CMatrix,
        pilot_matrix: CMatrix,
        noise_var: f64,
    ) -> Result<Self, BaselineError> {
        let n = channel_covariance.nrows();
        if channel_covariance.ncols() != n || pilot_matrix.ncols() != n {
            return Err(BaselineError::ShapeMismatch(format!(
                "covariance {}x{}, pilot operator {}x{}",
                n,
                channel_covariance.ncols(),
                pilot_matrix.nrows(),
                pilot_matrix.ncols()
            )));
        }
        Ok(Self {
            channel_covariance,
            pilot_matrix,
            noise_var,
        })
    }

    fn innovation_inverse(&self) -> Result<CMatrix, BaselineError> {
        let a = &self.pilot_matrix;
        let s = a * &self.channel_covariance * a.adjoint()
            + CMatrix::identity(a.nrows(), a.nrows()) * C64::new(self.noise_var, 0.0);
        s.try_inverse().ok_or(BaselineError::SingularInnovation)
    }

    /// `Ĥ = C Aᴴ (A C Aᴴ + σ²I)⁻¹ y_p`.
    pub fn estimate(
        &self,
        y_pilot: &CTensor3,
        shape: (usize, usize, usize),
    ) -> Result<ChannelTensor, BaselineError> {
        if y_pilot.len() != self.pilot_matrix.nrows()
            || shape.0 * shape.1 * shape.2 != self.pilot_matrix.ncols()
        {
            return Err(BaselineError::ShapeMismatch(
                "pilot observation does not match operator".into(),
            ));
        }
        let y = DVector::from_column_slice(y_pilot.data());
        let h = &self.channel_covariance
            * self.pilot_matrix.adjoint()
            * (self.innovation_inverse()? * y);
        Ok(ChannelTensor {
            h: CTensor3::from_vec(shape, h.as_slice().to_vec())?,
        })
    }

    /// `C − C Aᴴ (A C Aᴴ + σ²I)⁻¹ A C`.
    pub fn error_covariance(&self) -> Result<CMatrix, BaselineError> {
        let c = &self.channel_covariance;
        let a = &self.pilot_matrix;
        Ok(c - c * a.adjoint() * self.innovation_inverse()? * a * c)
    }

    /// Analytic normalized MSE `tr(error covariance)/tr(C)`.
    pub fn analytic_nmse(&self) -> Result<f64, BaselineError> {
        Ok(self.error_covariance()?.trace().re / self.channel_covariance.trace().re)
    }
}

/// Per-subcarrier least squares `X̂_f = Y_f Ĥ_fᴴ (Ĥ_f Ĥ_fᴴ)⁻¹` for `Y` of shape
/// `n_f × T × n_r` and `Ĥ` of shape `n_f × n_t × n_r`.
pub fn ls_detect(y: &CTensor3, h: &ChannelTensor) -> Result<CTensor3, BaselineError> {
    let (n_f, t, n_r) = y.dims();
    let (n_f2, n_t, n_r2) = h.h.dims();
    if n_f != n_f2 || n_r != n_r2 {
        return Err(BaselineError::ShapeMismatch(format!(
            "Y is {n_f}x{t}x{n_r}, H is {n_f2}x{n_t}x{n_r2}"
        )));
    }
    let mut x = CTensor3::zeros((n_f, t, n_t));
    for f in 0..n_f {
        let yf = y.slice_first(f);
        let hf = h.h.slice_first(f);
        let gram = &hf * hf.adjoint();
        let sv = gram.singular_values();
        if n_t > n_r || !(sv.min() > 1e-12 * sv.max()) {
            return Err(BaselineError::RankDeficient(f));
        }
        let inv = gram.try_inverse().ok_or(BaselineError::RankDeficient(f))?;
        x.set_slice_first(f, &(yf * hf.adjoint() * inv));
    }
    Ok(x)
}
