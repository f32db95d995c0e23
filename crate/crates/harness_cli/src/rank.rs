use channel_sim::{ChannelTensor, TransmitTensor};
use fim_bcrb::{assemble_fim, null_vectors, verify_rank_deficiency};
use serde::Serialize;
use tensor_core::rng::{cnormal_vec, stream_rng};
use tensor_core::{par, CTensor3};

use crate::error::HarnessError;
use crate::experiment::trial_seed;

/// Relative tolerance on `‖Fω‖ / (‖F‖·‖ω‖)` for null vectors.
pub const NULL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct RankRow {
    pub trial: usize,
    pub seed: u64,
    pub rank: usize,
    pub bound: usize,
    pub dim: usize,
    pub max_null_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct RankSummary {
    pub rows: Vec<RankRow>,
    pub bound: usize,
}

impl RankSummary {
    pub fn passed(&self) -> usize {
        self.rows.iter().filter(|r| r.pass).count()
    }

    pub fn line(&self) -> String {
        format!(
            "{}/{} pass, bound {}",
            self.passed(),
            self.rows.len(),
            self.bound
        )
    }
}

/// `X` and `H` with i.i.d. `CN(0, 1)` entries.
pub fn random_instance(
    dims: [usize; 4],
    seed: u64,
) -> Result<(TransmitTensor, ChannelTensor), HarnessError> {
    let [n_f, n_t, t_s, n_r] = dims;
    let x = CTensor3::from_vec(
        (n_f, t_s, n_t),
        cnormal_vec(&mut stream_rng(seed, 0), n_f * t_s * n_t, 1.0),
    )?;
    let h = CTensor3::from_vec(
        (n_f, n_t, n_r),
        cnormal_vec(&mut stream_rng(seed, 1), n_f * n_t * n_r, 1.0),
    )?;
    Ok((TransmitTensor { x }, ChannelTensor { h }))
}

/// Rank and null-vector check of the FIM on `trials` random instances of `(n_f, n_t, T, n_r)`.
pub fn rank_check(
    dims: [usize; 4],
    trials: usize,
    seed: u64,
    noise_var: f64,
) -> Result<RankSummary, HarnessError> {
    if dims.contains(&0) || trials == 0 {
        return Err(HarnessError::Config(
            "rank-check needs positive dims and trials".into(),
        ));
    }
    let rows = par::map_indexed(trials, |k| -> Result<RankRow, HarnessError> {
        let s = trial_seed(seed, k);
        let (x, h) = random_instance(dims, s)?;
        let rc = verify_rank_deficiency(&x, &h, noise_var)?;
        let f = assemble_fim(&x, &h, noise_var)?;
        let fnorm = f.m.singular_values().max();
        let max_null_residual = null_vectors(&x, &h)?
            .vectors
            .iter()
            .map(|w| (&f.m * w).norm() / (fnorm * w.norm()))
            .fold(0.0, f64::max);
        Ok(RankRow {
            trial: k,
            seed: s,
            rank: rc.rank,
            bound: rc.bound,
            dim: rc.dim,
            max_null_residual,
            pass: rc.pass && max_null_residual <= NULL_TOL,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let [n_f, n_t, t_s, n_r] = dims;
    Ok(RankSummary {
        rows,
        bound: n_f * n_t * (t_s + n_r) - n_f * n_t * n_t,
    })
}
