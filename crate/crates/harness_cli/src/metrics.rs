use serde::Serialize;
use tensor_core::CTensor3;

use crate::error::HarnessError;

/// Reported floor for exact recovery.
pub const NMSE_FLOOR_DB: f64 = -120.0;

pub fn to_db(ratio: f64) -> f64 {
    (10.0 * ratio.log10()).max(NMSE_FLOOR_DB)
}

/// Channel uses per source dimension.
pub fn channel_bandwidth_ratio(n_f: usize, t_s: usize, source_dim: usize) -> f64 {
    (n_f * t_s) as f64 / source_dim as f64
}

/// Squared error and reference energy of one estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorEnergy {
    pub err: f64,
    pub energy: f64,
}

impl ErrorEnergy {
    pub fn of(est: &CTensor3, truth: &CTensor3) -> Result<Self, HarnessError> {
        if est.dims() != truth.dims() {
            return Err(HarnessError::Numerical(format!(
                "estimate {:?} vs truth {:?}",
                est.dims(),
                truth.dims()
            )));
        }
        let energy = truth.norm_sqr();
        if energy == 0.0 {
            return Err(HarnessError::ZeroNorm);
        }
        Ok(Self {
            err: est.sub(truth).norm_sqr(),
            energy,
        })
    }

    /// Over concatenated real source vectors.
    pub fn of_sources(est: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<Self, HarnessError> {
        if est.len() != truth.len() || est.iter().zip(truth).any(|(a, b)| a.len() != b.len()) {
            return Err(HarnessError::Numerical(
                "source estimate shape differs from truth".into(),
            ));
        }
        let energy: f64 = truth.iter().flatten().map(|v| v * v).sum();
        if energy == 0.0 {
            return Err(HarnessError::ZeroNorm);
        }
        let err = est
            .iter()
            .flatten()
            .zip(truth.iter().flatten())
            .map(|(a, b)| (a - b).powi(2))
            .sum();
        Ok(Self { err, energy })
    }

    pub fn ratio(&self) -> f64 {
        self.err / self.energy
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub h: ErrorEnergy,
    pub x: ErrorEnergy,
    pub s: ErrorEnergy,
}

impl Metrics {
    pub fn nmse_h_db(&self) -> f64 {
        to_db(self.h.ratio())
    }

    pub fn nmse_x_db(&self) -> f64 {
        to_db(self.x.ratio())
    }

    pub fn nmse_s_db(&self) -> f64 {
        to_db(self.s.ratio())
    }
}

/// Channel, transmit block and sources of one trial, true or estimated.
#[derive(Debug, Clone, Copy)]
pub struct Outcome<'a> {
    pub h: &'a CTensor3,
    /// For estimates, the block re-encoded from the source estimate.
    pub x: &'a CTensor3,
    pub s: &'a [Vec<f64>],
}

/// NMSE of the channel, of the transmit block and of the sources.
pub fn compute_metrics(truth: Outcome<'_>, est: Outcome<'_>) -> Result<Metrics, HarnessError> {
    Ok(Metrics {
        h: ErrorEnergy::of(est.h, truth.h)?,
        x: ErrorEnergy::of(est.x, truth.x)?,
        s: ErrorEnergy::of_sources(est.s, truth.s)?,
    })
}

/// Mean, standard error and pooled ratio of per-trial NMSEs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NmseSummary {
    pub mean: f64,
    pub se: f64,
    pub pooled: f64,
}

impl NmseSummary {
    pub fn from_trials(items: &[ErrorEnergy]) -> Option<Self> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        let mean = items.iter().map(|e| e.ratio()).sum::<f64>() / n;
        let var = if items.len() > 1 {
            items
                .iter()
                .map(|e| (e.ratio() - mean).powi(2))
                .sum::<f64>()
                / (n - 1.0)
        } else {
            0.0
        };
        let pooled =
            items.iter().map(|e| e.err).sum::<f64>() / items.iter().map(|e| e.energy).sum::<f64>();
        Some(Self {
            mean,
            se: (var / n).sqrt(),
            pooled,
        })
    }

    pub fn mean_db(&self) -> f64 {
        to_db(self.mean)
    }

    pub fn pooled_db(&self) -> f64 {
        to_db(self.pooled)
    }

    /// First-order standard error in dB.
    pub fn se_db(&self) -> f64 {
        10.0 / std::f64::consts::LN_10 * self.se / self.mean
    }
}
