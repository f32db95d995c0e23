use encoders::data_gain;
use fim_bcrb::{bcrb, bfim, smoothed_real_precision, BcrbResult, PriorTerm};
use nalgebra::DMatrix;
use serde::Serialize;
use tensor_core::{par, CMatrix};

use crate::error::HarnessError;
use crate::experiment::{trial_seed, Experiment, Series};

/// Wirtinger prior FIM of the channel in per-subcarrier parameter order.
pub fn channel_prior_fim(exp: &Experiment) -> Result<CMatrix, HarnessError> {
    let d = &exp.dims;
    let inv = exp
        .covariance
        .clone()
        .try_inverse()
        .ok_or_else(|| HarnessError::Numerical("channel covariance is singular".into()))?;
    let n = d.n_f * d.n_t * d.n_r;
    let tensor_index = |i: usize| {
        let (f, rest) = (i / (d.n_t * d.n_r), i % (d.n_t * d.n_r));
        let (k, r) = (rest % d.n_t, rest / d.n_t);
        f + d.n_f * (k + d.n_t * r)
    };
    Ok(CMatrix::from_fn(n, n, |i, j| {
        inv[(tensor_index(i), tensor_index(j))]
    }))
}

/// Real precision of the ε-smoothed transmit block induced by the source prior, encoders
/// and pilots, over `[Re x; Im x]` in per-subcarrier order. Pilot entries are fixed and
/// carry information `1/ε²`.
pub fn transmit_prior_precision(
    exp: &Experiment,
    series: &Series,
    eps: f64,
) -> Result<DMatrix<f64>, HarnessError> {
    let d = &exp.dims;
    let (n_f, t_s, n_t) = (d.n_f, d.t_s, d.n_t);
    let col = n_f * t_s;
    let n_x = col * n_t;
    let off = encoders::data_symbol_offset(&series.scheme);
    let t_data = series.scheme.t_data(t_s);
    let gain = data_gain(&series.scheme);
    let cov_s = series.source_prior.covariance();
    let mut out = DMatrix::<f64>::zeros(2 * n_x, 2 * n_x);
    for (k, enc) in series.encoders.iter().enumerate() {
        let jac = enc.jacobian();
        let m = jac.ncols();
        let mut map = DMatrix::<f64>::zeros(2 * col, m);
        for t in 0..t_data {
            for f in 0..n_f {
                let e = f + n_f * (off + t);
                for c in 0..m {
                    let v = jac[(f + n_f * t, c)] * gain;
                    map[(e, c)] = v.re;
                    map[(col + e, c)] = v.im;
                }
            }
        }
        let pk = smoothed_real_precision(&(&map * &cov_s * map.transpose()), eps)?;
        let place = |e: usize| {
            let (part, e) = (e / col, e % col);
            let (f, t) = (e % n_f, e / n_f);
            part * n_x + f * t_s * n_t + t + t_s * k
        };
        for a in 0..2 * col {
            for b in 0..2 * col {
                out[(place(a), place(b))] = pk[(a, b)];
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundPoint {
    pub csnr_db: f64,
    pub result: BcrbResult,
    pub n_samples: usize,
}

/// Joint bound for a series over the trial ensemble at each CSNR.
pub fn series_bounds(
    exp: &Experiment,
    series: &Series,
    csnr_db: &[f64],
) -> Result<Vec<BoundPoint>, HarnessError> {
    let n = exp.cfg.bound.n_samples;
    let ensemble = par::map_indexed(n, |k| exp.draw_pair(series, trial_seed(exp.cfg.seed, k)))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let mean_x = ensemble.iter().map(|(x, _)| x.x.norm_sqr()).sum::<f64>() / n as f64;
    let mean_h = exp.covariance.trace().re;
    let px = PriorTerm::Real(transmit_prior_precision(exp, series, exp.cfg.bound.eps)?);
    let ph = PriorTerm::Matrix(channel_prior_fim(exp)?);
    csnr_db
        .iter()
        .map(|&c| {
            let b = bfim(&ensemble, exp.noise_var(c), &px, &ph)?;
            let mut result = bcrb(&b, mean_h, Some(mean_x))?;
            result.eps = Some(exp.cfg.bound.eps);
            Ok(BoundPoint {
                csnr_db: c,
                result,
                n_samples: n,
            })
        })
        .collect()
}

/// Bound for a fully known pilot block: the channel posterior variance.
pub fn known_block_bound(
    exp: &Experiment,
    x: &channel_sim::TransmitTensor,
    csnr_db: f64,
) -> Result<BcrbResult, HarnessError> {
    let h0 = channel_sim::ChannelTensor {
        h: tensor_core::CTensor3::zeros(exp.dims.channel_shape()),
    };
    let ph = PriorTerm::Matrix(channel_prior_fim(exp)?);
    let b = bfim(
        &[(x.clone(), h0)],
        exp.noise_var(csnr_db),
        &PriorTerm::Known,
        &ph,
    )?;
    Ok(bcrb(&b, exp.covariance.trace().re, None)?)
}
