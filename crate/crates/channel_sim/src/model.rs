use flow_priors::GmmPrior;
use tensor_core::iso::unstack;
use tensor_core::rng::{cnormal_vec, stream_rng};
use tensor_core::CTensor3;

use crate::dims::SystemDims;
use crate::error::ChannelError;

/// Frequency-space channel `H` with shape `n_f × n_t × n_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTensor {
    pub h: CTensor3,
}

/// Transmitted block `X` with shape `n_f × t_s × n_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransmitTensor {
    pub x: CTensor3,
}

/// Received block `Y` (`n_f × t_s × n_r`) with its noise realization.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveTensor {
    pub y: CTensor3,
    pub w: CTensor3,
}

impl ChannelTensor {
    /// Stacked real embedding `[Re vec(H); Im vec(H)]`.
    pub fn to_real(&self) -> Vec<f64> {
        tensor_core::iso::stack(self.h.data())
    }

    pub fn from_real(shape: (usize, usize, usize), v: &[f64]) -> Result<Self, ChannelError> {
        Ok(Self {
            h: CTensor3::from_vec(shape, unstack(v))?,
        })
    }
}

/// Draws one channel from a real-embedded prior of dimension `2·n_f·n_t·n_r`.
pub fn generate_channel(
    prior: &GmmPrior,
    dims: &SystemDims,
    seed: u64,
) -> Result<ChannelTensor, ChannelError> {
    let expected = dims.channel_real_dim();
    if prior.dim() != expected {
        return Err(ChannelError::DimensionMismatch {
            expected,
            got: prior.dim(),
        });
    }
    let mut rng = stream_rng(seed, 0);
    ChannelTensor::from_real(dims.channel_shape(), &prior.sample(&mut rng))
}

fn check_shapes(
    x: &TransmitTensor,
    h: &ChannelTensor,
) -> Result<(usize, usize, usize, usize), ChannelError> {
    let (nf, ts, nt) = x.x.dims();
    let (nf2, nt2, nr) = h.h.dims();
    if nf != nf2 || nt != nt2 {
        return Err(ChannelError::ShapeMismatch(format!(
            "X is {nf}x{ts}x{nt} but H is {nf2}x{nt2}x{nr}"
        )));
    }
    Ok((nf, ts, nt, nr))
}

/// `X_f H_f` for every subcarrier.
pub fn noiseless(x: &TransmitTensor, h: &ChannelTensor) -> Result<CTensor3, ChannelError> {
    let (nf, ts, nt, nr) = check_shapes(x, h)?;
    let mut y = CTensor3::zeros((nf, ts, nr));
    for r in 0..nr {
        for k in 0..nt {
            for t in 0..ts {
                for f in 0..nf {
                    let v = y.get(f, t, r) + x.x.get(f, t, k) * h.h.get(f, k, r);
                    y.set(f, t, r, v);
                }
            }
        }
    }
    Ok(y)
}

/// `Y_f = X_f H_f + W_f` with i.i.d. `CN(0, noise_var)` noise; `noise_var = 0` is allowed.
pub fn transmit(
    x: &TransmitTensor,
    h: &ChannelTensor,
    noise_var: f64,
    seed: u64,
) -> Result<ReceiveTensor, ChannelError> {
    if !(noise_var >= 0.0) {
        return Err(ChannelError::InvalidDims("noise_var must be >= 0".into()));
    }
    let clean = noiseless(x, h)?;
    let shape = clean.dims();
    let mut rng = stream_rng(seed, 1);
    let w = if noise_var == 0.0 {
        CTensor3::zeros(shape)
    } else {
        CTensor3::from_vec(shape, cnormal_vec(&mut rng, clean.len(), noise_var))?
    };
    Ok(ReceiveTensor {
        y: clean.add(&w),
        w,
    })
}

/// `10·log10(‖Y − W‖² / ‖W‖²)`.
pub fn csnr(y: &ReceiveTensor) -> Result<f64, ChannelError> {
    let nw = y.w.norm_sqr();
    if nw == 0.0 {
        return Err(ChannelError::CsnrUndefined);
    }
    Ok(10.0 * (y.y.sub(&y.w).norm_sqr() / nw).log10())
}

/// Noise variance meeting `target_db` on average over an `(X, H)` ensemble:
/// `σ² = mean‖XH‖² / (N·10^{target/10})` with `N = n_f·t_s·n_r`.
pub fn calibrate_noise_var(
    ensemble: &[(TransmitTensor, ChannelTensor)],
    target_db: f64,
) -> Result<f64, ChannelError> {
    if ensemble.is_empty() {
        return Err(ChannelError::EmptyEnsemble);
    }
    let mut energy = 0.0;
    let mut n = 0usize;
    for (x, h) in ensemble {
        let y = noiseless(x, h)?;
        energy += y.norm_sqr();
        n = y.len();
    }
    let mean = energy / ensemble.len() as f64;
    Ok(mean / (n as f64 * 10f64.powf(target_db / 10.0)))
}

impl TransmitTensor {
    /// Squared Frobenius norm of transmitter `k`'s codeword.
    pub fn user_energy(&self, k: usize) -> f64 {
        let (nf, ts, _) = self.x.dims();
        let mut e = 0.0;
        for t in 0..ts {
            for f in 0..nf {
                e += self.x.get(f, t, k).norm_sqr();
            }
        }
        e
    }
}
