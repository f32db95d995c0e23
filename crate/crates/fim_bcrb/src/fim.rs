use channel_sim::{ChannelTensor, TransmitTensor};
use nalgebra::DVector;
use tensor_core::{CMatrix, C64};

use crate::error::FimError;

/// Hermitian FIM on `[x; h]`.
#[derive(Debug, Clone)]
pub struct FimMatrix {
    pub m: CMatrix,
    pub n_x: usize,
    pub n_h: usize,
}

impl FimMatrix {
    pub fn side(&self) -> usize {
        self.m.nrows()
    }

    pub fn hermitian_error(&self) -> f64 {
        (&self.m - self.m.adjoint()).norm()
    }

    /// Ascending eigenvalues of the Hermitian part.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.m)
    }
}

pub(crate) fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = hermitize(m)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

fn dims(x: &TransmitTensor, h: &ChannelTensor) -> Result<(usize, usize, usize, usize), FimError> {
    let (n_f, t_s, n_t) = x.x.dims();
    let (n_f2, n_t2, n_r) = h.h.dims();
    if n_f != n_f2 || n_t != n_t2 {
        return Err(FimError::ShapeMismatch(format!(
            "X is {n_f}x{t_s}x{n_t}, H is {n_f2}x{n_t2}x{n_r}"
        )));
    }
    Ok((n_f, t_s, n_t, n_r))
}

/// `F = (2/σ²)·JᴴJ` with `J` the Jacobian of `vec(X_f H_f)` on each subcarrier, which gives
/// the blocks `(H*Hᵀ)⊗I_T`, `H*⊗X`, `Hᵀ⊗Xᴴ` and `I_{n_r}⊗XᴴX` per subcarrier.
pub fn assemble_fim(
    x: &TransmitTensor,
    h: &ChannelTensor,
    noise_var: f64,
) -> Result<FimMatrix, FimError> {
    if !(noise_var > 0.0) {
        return Err(FimError::Invalid("noise_var must be positive".into()));
    }
    let (n_f, t_s, n_t, n_r) = dims(x, h)?;
    let bx = t_s * n_t;
    let bh = n_t * n_r;
    let n_x = n_f * bx;
    let n_h = n_f * bh;
    let mut m = CMatrix::zeros(n_x + n_h, n_x + n_h);
    let c = C64::new(2.0 / noise_var, 0.0);
    for f in 0..n_f {
        let mut j = CMatrix::zeros(t_s * n_r, bx + bh);
        for r in 0..n_r {
            for t in 0..t_s {
                let row = t + t_s * r;
                for k in 0..n_t {
                    j[(row, t + t_s * k)] = h.h.get(f, k, r);
                    j[(row, bx + k + n_t * r)] = x.x.get(f, t, k);
                }
            }
        }
        let jj = j.adjoint() * &j * c;
        let (ox, oh) = (f * bx, n_x + f * bh);
        m.view_mut((ox, ox), (bx, bx))
            .copy_from(&jj.view((0, 0), (bx, bx)));
        m.view_mut((ox, oh), (bx, bh))
            .copy_from(&jj.view((0, bx), (bx, bh)));
        m.view_mut((oh, ox), (bh, bx))
            .copy_from(&jj.view((bx, 0), (bh, bx)));
        m.view_mut((oh, oh), (bh, bh))
            .copy_from(&jj.view((bx, bx), (bh, bh)));
    }
    Ok(FimMatrix { m, n_x, n_h })
}

/// Directions `ω^(f,κ,ℓ)` along which `X_f H_f` is unchanged to first order.
#[derive(Debug, Clone)]
pub struct NullBasis {
    pub vectors: Vec<DVector<C64>>,
    /// `(f, κ, ℓ)` per vector.
    pub labels: Vec<(usize, usize, usize)>,
    /// Set when some column of `X_f` or row of `H_f` is zero.
    pub degenerate: bool,
}

impl NullBasis {
    pub fn matrix(&self) -> CMatrix {
        CMatrix::from_columns(&self.vectors)
    }
}

/// For each subcarrier `f` and pair `(κ, ℓ)`: `A_f = X_f[:,κ]·e_ℓᵀ` in the x-block and
/// `B_f = −e_κ·H_f[ℓ,:]` in the h-block, so that `A_f H_f + X_f B_f = 0`.
pub fn null_vectors(x: &TransmitTensor, h: &ChannelTensor) -> Result<NullBasis, FimError> {
    let (n_f, t_s, n_t, n_r) = dims(x, h)?;
    let n_x = n_f * t_s * n_t;
    let side = n_x + n_f * n_t * n_r;
    let mut vectors = Vec::with_capacity(n_f * n_t * n_t);
    let mut labels = Vec::with_capacity(n_f * n_t * n_t);
    let mut degenerate = false;
    for f in 0..n_f {
        for k in 0..n_t {
            let col_zero = (0..t_s).all(|t| x.x.get(f, t, k).norm() == 0.0);
            let row_zero = (0..n_r).all(|r| h.h.get(f, k, r).norm() == 0.0);
            degenerate |= col_zero || row_zero;
        }
        for kappa in 0..n_t {
            for ell in 0..n_t {
                let mut w = DVector::zeros(side);
                for t in 0..t_s {
                    w[f * t_s * n_t + t + t_s * ell] = x.x.get(f, t, kappa);
                }
                for r in 0..n_r {
                    w[n_x + f * n_t * n_r + kappa + n_t * r] = -h.h.get(f, ell, r);
                }
                vectors.push(w);
                labels.push((f, kappa, ell));
            }
        }
    }
    Ok(NullBasis {
        vectors,
        labels,
        degenerate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankCheck {
    pub rank: usize,
    pub bound: usize,
    pub dim: usize,
    pub pass: bool,
}

/// Numerical rank (singular values above `1e-8·σ_max`) against `n_f n_t(T+n_r) − n_f n_t²`.
///
/// The bound assumes `T ≥ n_t` and `n_r ≥ n_t`; below that the null vectors are dependent.
pub fn verify_rank_deficiency(
    x: &TransmitTensor,
    h: &ChannelTensor,
    noise_var: f64,
) -> Result<RankCheck, FimError> {
    let (n_f, t_s, n_t, n_r) = dims(x, h)?;
    let fim = assemble_fim(x, h, noise_var)?;
    let sv = fim.m.singular_values();
    let smax = sv.max();
    let rank = sv.iter().filter(|&&s| s > 1e-8 * smax).count();
    let dim = n_f * n_t * (t_s + n_r);
    let bound = dim - n_f * n_t * n_t;
    Ok(RankCheck {
        rank,
        bound,
        dim,
        pass: rank <= bound,
    })
}
