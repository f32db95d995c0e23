use channel_sim::{ChannelTensor, TransmitTensor};
use nalgebra::DMatrix;
use serde::Serialize;
use tensor_core::{par, CMatrix, C64};

use crate::error::FimError;
use crate::fim::{assemble_fim, hermitize};

/// Weight of the Wirtinger prior FIM relative to the data FIM. With it the scalar
/// known-pilot Gaussian case reproduces the posterior variance.
pub const FIM_CALIBRATION: f64 = 2.0;

/// Prior information on one parameter block.
#[derive(Debug, Clone)]
pub enum PriorTerm {
    /// The block is known and excluded from the BFIM.
    Known,
    /// No prior information.
    Zero,
    /// Wirtinger prior FIM `E[s sᴴ]` of a circular prior on the block.
    Matrix(CMatrix),
    /// Real precision of the block in its `[Re; Im]` embedding; admits non-circular priors.
    Real(DMatrix<f64>),
}

/// Bayesian FIM in the real embedding `[Re φ; Im φ]` of the unknown blocks `φ = [x; h]`.
#[derive(Debug, Clone)]
pub struct Bfim {
    pub m: DMatrix<f64>,
    pub n_x: usize,
    pub n_h: usize,
    pub min_eig: f64,
    pub max_eig: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BcrbResult {
    pub bcrb_h: f64,
    pub bcrb_x: Option<f64>,
    pub bfim_condition: f64,
    pub min_eig: f64,
    pub eps: Option<f64>,
}

impl BcrbResult {
    pub fn bcrb_h_db(&self) -> f64 {
        10.0 * self.bcrb_h.log10()
    }

    pub fn bcrb_x_db(&self) -> Option<f64> {
        self.bcrb_x.map(|v| 10.0 * v.log10())
    }
}

/// Real form `[[Re A, −Im A], [Im A, Re A]]` of a complex matrix.
pub fn real_embedding(a: &CMatrix) -> DMatrix<f64> {
    let (r, c) = a.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for j in 0..c {
        for i in 0..r {
            let z = a[(i, j)];
            out[(i, j)] = z.re;
            out[(r + i, c + j)] = z.re;
            out[(r + i, j)] = z.im;
            out[(i, c + j)] = -z.im;
        }
    }
    out
}

/// Adds a block prior to the real BFIM of side `2·total`, block at complex offset `offset`.
fn add_prior(
    m: &mut DMatrix<f64>,
    total: usize,
    offset: usize,
    n: usize,
    term: &PriorTerm,
) -> Result<(), FimError> {
    let real = match term {
        PriorTerm::Known | PriorTerm::Zero => return Ok(()),
        PriorTerm::Matrix(p) => {
            if p.nrows() != n || p.ncols() != n {
                return Err(FimError::ShapeMismatch(format!(
                    "prior FIM is {}x{}, block is {n}",
                    p.nrows(),
                    p.ncols()
                )));
            }
            real_embedding(p) * FIM_CALIBRATION
        }
        PriorTerm::Real(p) => {
            if p.nrows() != 2 * n || p.ncols() != 2 * n {
                return Err(FimError::ShapeMismatch(format!(
                    "real prior is {}x{}, block needs {}",
                    p.nrows(),
                    p.ncols(),
                    2 * n
                )));
            }
            p.clone()
        }
    };
    for (bi, oi) in [(0, offset), (n, total + offset)] {
        for (bj, oj) in [(0, offset), (n, total + offset)] {
            let mut v = m.view_mut((oi, oj), (n, n));
            v += real.view((bi, bj), (n, n));
        }
    }
    Ok(())
}

/// Ensemble-averaged FIM plus the block-diagonal prior term, in the real embedding.
pub fn bfim(
    ensemble: &[(TransmitTensor, ChannelTensor)],
    noise_var: f64,
    prior_x: &PriorTerm,
    prior_h: &PriorTerm,
) -> Result<Bfim, FimError> {
    if ensemble.is_empty() {
        return Err(FimError::EmptyEnsemble);
    }
    if matches!(prior_h, PriorTerm::Known) {
        return Err(FimError::Invalid(
            "the channel block cannot be known".into(),
        ));
    }
    let fims = par::map_indexed(ensemble.len(), |i| {
        assemble_fim(&ensemble[i].0, &ensemble[i].1, noise_var)
    });
    let mut sum: Option<CMatrix> = None;
    let (mut n_x, mut n_h) = (0, 0);
    for f in fims {
        let f = f?;
        n_x = f.n_x;
        n_h = f.n_h;
        match sum.as_mut() {
            Some(s) => {
                if s.nrows() != f.m.nrows() {
                    return Err(FimError::ShapeMismatch(
                        "ensemble members differ in shape".into(),
                    ));
                }
                *s += f.m
            }
            None => sum = Some(f.m),
        }
    }
    let mean = sum.expect("non-empty") / C64::new(ensemble.len() as f64, 0.0);
    let (data, n_x) = if matches!(prior_x, PriorTerm::Known) {
        (mean.view((n_x, n_x), (n_h, n_h)).into_owned(), 0)
    } else {
        (mean, n_x)
    };
    let total = n_x + n_h;
    let mut m = real_embedding(&hermitize(&data));
    add_prior(&mut m, total, 0, n_x, prior_x)?;
    add_prior(&mut m, total, n_x, n_h, prior_h)?;
    let m = (&m + m.transpose()) * 0.5;
    let mut eig: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    let min_eig = eig[0];
    let max_eig = *eig.last().expect("non-empty");
    if min_eig <= 1e-12 * max_eig {
        return Err(FimError::Singular {
            min_eig,
            max_eig,
            null_dim: eig.iter().filter(|&&e| e <= 1e-8 * max_eig).count() / 2,
        });
    }
    Ok(Bfim {
        m,
        n_x,
        n_h,
        min_eig,
        max_eig,
    })
}

/// Normalized bounds `tr([F_B⁻¹]_hh)/E‖H‖²` and `tr([F_B⁻¹]_xx)/E‖X‖²`, with traces over
/// the real and imaginary coordinates of each block, inverting by eigendecomposition.
pub fn bcrb(
    b: &Bfim,
    mean_h_energy: f64,
    mean_x_energy: Option<f64>,
) -> Result<BcrbResult, FimError> {
    if !(mean_h_energy > 0.0) {
        return Err(FimError::Invalid(
            "mean channel energy must be positive".into(),
        ));
    }
    let eig = b.m.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    let max = eig.eigenvalues.max();
    let cond = max / min;
    if !(min > 0.0) || cond > 1e12 {
        return Err(FimError::IllConditioned(if min > 0.0 {
            cond
        } else {
            f64::INFINITY
        }));
    }
    let q = &eig.eigenvectors;
    let total = b.n_x + b.n_h;
    let block_trace = |lo: usize, n: usize| -> f64 {
        let mut tr = 0.0;
        for i in (lo..lo + n).chain(total + lo..total + lo + n) {
            for (j, lam) in eig.eigenvalues.iter().enumerate() {
                tr += q[(i, j)].powi(2) / lam;
            }
        }
        tr
    };
    let bcrb_h = block_trace(b.n_x, b.n_h) / mean_h_energy;
    let bcrb_x = match (b.n_x, mean_x_energy) {
        (0, _) | (_, None) => None,
        (n, Some(e)) => Some(block_trace(0, n) / e),
    };
    Ok(BcrbResult {
        bcrb_h,
        bcrb_x,
        bfim_condition: cond,
        min_eig: b.min_eig,
        eps: None,
    })
}
