use rand::Rng;
use serde::{Deserialize, Serialize};
use tensor_core::rng::stream_rng;
use tensor_core::{CMatrix, C64};

use crate::error::EncoderError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PilotKind {
    None,
    Orthogonal,
    Superimposed,
}

impl PilotKind {
    pub fn label(self) -> &'static str {
        match self {
            PilotKind::None => "none",
            PilotKind::Orthogonal => "op",
            PilotKind::Superimposed => "sp",
        }
    }
}

/// Pilot layout. `pilots[f]` is the `t_pilot × n_t` matrix on subcarrier `f`
/// (unit-modulus entries before power scaling).
#[derive(Debug, Clone, PartialEq)]
pub struct PilotScheme {
    pub kind: PilotKind,
    pub alpha: f64,
    pub pilot_power_fraction: f64,
    pub pilots: Vec<CMatrix>,
}

/// Columns `0..n_t` of the `len`-point DFT matrix.
fn dft_columns(len: usize, n_t: usize) -> CMatrix {
    CMatrix::from_fn(len, n_t, |t, k| {
        let a = -2.0 * std::f64::consts::PI * (t * k) as f64 / len as f64;
        C64::new(a.cos(), a.sin())
    })
}

impl PilotScheme {
    pub fn none() -> Self {
        Self {
            kind: PilotKind::None,
            alpha: 0.0,
            pilot_power_fraction: 0.0,
            pilots: vec![],
        }
    }

    /// Orthogonal pilots in the first `alpha·t_s` symbols: DFT columns with a seeded
    /// per-subcarrier phase. `alpha = 0` reduces to [`PilotScheme::none`].
    pub fn orthogonal(
        alpha: f64,
        n_f: usize,
        t_s: usize,
        n_t: usize,
        power_p: f64,
        seed: u64,
    ) -> Result<Self, EncoderError> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(EncoderError::InvalidScheme(format!(
                "alpha {alpha} outside [0, 1)"
            )));
        }
        let len = alpha * t_s as f64;
        if (len - len.round()).abs() > 1e-9 {
            return Err(EncoderError::NonIntegerPilotLength(len));
        }
        let tp = len.round() as usize;
        if tp == 0 {
            return Ok(Self::none());
        }
        if tp < n_t {
            return Err(EncoderError::InvalidScheme(format!(
                "{tp} pilot symbols cannot carry {n_t} orthogonal pilots"
            )));
        }
        Ok(Self {
            kind: PilotKind::Orthogonal,
            alpha,
            pilot_power_fraction: 0.0,
            pilots: Self::phased(tp, n_f, n_t, power_p, seed),
        })
    }

    /// Superimposed pilots over the whole block with pilot power fraction `rho`.
    pub fn superimposed(
        rho: f64,
        n_f: usize,
        t_s: usize,
        n_t: usize,
        power_p: f64,
        seed: u64,
    ) -> Result<Self, EncoderError> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(EncoderError::InvalidScheme(format!(
                "pilot power fraction {rho} outside (0, 1)"
            )));
        }
        if t_s < n_t {
            return Err(EncoderError::InvalidScheme("t_s < n_t".into()));
        }
        Ok(Self {
            kind: PilotKind::Superimposed,
            alpha: 0.0,
            pilot_power_fraction: rho,
            pilots: Self::phased(t_s, n_f, n_t, power_p, seed),
        })
    }

    fn phased(len: usize, n_f: usize, n_t: usize, power_p: f64, seed: u64) -> Vec<CMatrix> {
        let base = dft_columns(len, n_t) * C64::new(power_p.sqrt(), 0.0);
        let mut rng = stream_rng(seed, 7);
        (0..n_f)
            .map(|_| {
                let phi: f64 = rng.random::<f64>() * 2.0 * std::f64::consts::PI;
                &base * C64::new(phi.cos(), phi.sin())
            })
            .collect()
    }

    /// Number of pilot-only OFDM symbols.
    pub fn pilot_symbols(&self) -> usize {
        match self.kind {
            PilotKind::Orthogonal => self.pilots.first().map_or(0, |p| p.nrows()),
            _ => 0,
        }
    }

    /// Number of OFDM symbols carrying data.
    pub fn t_data(&self, t_s: usize) -> usize {
        t_s - self.pilot_symbols()
    }
}
