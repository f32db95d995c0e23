use std::path::Path;

use nalgebra::DVector;
use serde_json::json;
use tensor_core::blob::{complex_from_payload, complex_payload, read_blob, write_blob};
use tensor_core::rng::{cnormal_vec, stream_rng};
use tensor_core::{CMatrix, C64};

use crate::error::EncoderError;

/// A realized codeword may exceed its average budget by at most this factor.
pub const OVERFLOW_FACTOR: f64 = 1.5;

/// Pairs consecutive real entries as `(Re, Im)`; odd lengths are zero-padded.
pub fn complexify(s: &[f64]) -> Vec<C64> {
    s.chunks(2)
        .map(|p| C64::new(p[0], if p.len() > 1 { p[1] } else { 0.0 }))
        .collect()
}

/// Inverse of [`complexify`], truncated to `m` entries.
pub fn decomplexify(z: &[C64], m: usize) -> Vec<f64> {
    z.iter().flat_map(|c| [c.re, c.im]).take(m).collect()
}

/// `X_k = reshape(scale·G·complexify(s), n_f × t_data)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearEncoder {
    g: CMatrix,
    scale: f64,
    m: usize,
    n_f: usize,
    t_data: usize,
    power_p: f64,
}

impl LinearEncoder {
    pub fn new(
        g: CMatrix,
        scale: f64,
        m: usize,
        n_f: usize,
        t_data: usize,
        power_p: f64,
    ) -> Result<Self, EncoderError> {
        if g.nrows() != n_f * t_data {
            return Err(EncoderError::Invalid(format!(
                "G has {} rows, expected n_f·t_data = {}",
                g.nrows(),
                n_f * t_data
            )));
        }
        if g.ncols() != m.div_ceil(2) || m == 0 {
            return Err(EncoderError::Invalid(format!(
                "G has {} columns for m = {m}",
                g.ncols()
            )));
        }
        if !(scale > 0.0) || !(power_p > 0.0) {
            return Err(EncoderError::Invalid(
                "scale and power must be positive".into(),
            ));
        }
        let sv = g.clone().svd(false, false).singular_values;
        let max = sv.max();
        if g.ncols() > g.nrows() || sv.iter().any(|&s| s <= 1e-10 * max) {
            return Err(EncoderError::RankDeficient);
        }
        Ok(Self {
            g,
            scale,
            m,
            n_f,
            t_data,
            power_p,
        })
    }

    /// Random `G` with orthonormal columns, scaled so `E‖X‖² = n_f·t_data·P`
    /// for sources with `E‖s‖² = source_energy`.
    pub fn random_orthonormal(
        n_f: usize,
        t_data: usize,
        m: usize,
        power_p: f64,
        source_energy: f64,
        seed: u64,
    ) -> Result<Self, EncoderError> {
        let n = n_f * t_data;
        let mc = m.div_ceil(2);
        if mc > n {
            return Err(EncoderError::Invalid(format!(
                "{mc} complex source entries do not fit {n} data symbols"
            )));
        }
        let mut rng = stream_rng(seed, 0);
        let a = CMatrix::from_vec(n, mc, cnormal_vec(&mut rng, n * mc, 1.0));
        let q = a.qr().q();
        let scale = (n as f64 * power_p / source_energy).sqrt();
        Self::new(q, scale, m, n_f, t_data, power_p)
    }

    pub fn g(&self) -> &CMatrix {
        &self.g
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn source_dim(&self) -> usize {
        self.m
    }

    pub fn n_f(&self) -> usize {
        self.n_f
    }

    pub fn t_data(&self) -> usize {
        self.t_data
    }

    pub fn budget(&self) -> f64 {
        (self.n_f * self.t_data) as f64 * self.power_p
    }

    /// Codeword without the overflow check.
    pub fn encode_unchecked(&self, s: &[f64]) -> Result<CMatrix, EncoderError> {
        if s.len() != self.m {
            return Err(EncoderError::LengthMismatch {
                expected: self.m,
                got: s.len(),
            });
        }
        let z = DVector::from_vec(complexify(s));
        let x = &self.g * z * C64::new(self.scale, 0.0);
        Ok(CMatrix::from_column_slice(
            self.n_f,
            self.t_data,
            x.as_slice(),
        ))
    }

    pub fn encode(&self, s: &[f64]) -> Result<CMatrix, EncoderError> {
        let x = self.encode_unchecked(s)?;
        let energy = x.norm_squared();
        let limit = OVERFLOW_FACTOR * self.budget();
        if energy > limit {
            return Err(EncoderError::PowerOverflow { energy, limit });
        }
        Ok(x)
    }

    /// `∂ vec(X) / ∂ s_j` as columns: `scale·G[:, j/2]` for even `j`, `i·scale·G[:, j/2]` for odd `j`.
    pub fn jacobian(&self) -> CMatrix {
        let unit = [C64::new(self.scale, 0.0), C64::new(0.0, self.scale)];
        CMatrix::from_fn(self.g.nrows(), self.m, |r, j| {
            self.g[(r, j / 2)] * unit[j % 2]
        })
    }

    /// Least-squares inverse of [`LinearEncoder::encode`].
    pub fn decode_ls(&self, x: &CMatrix) -> Result<Vec<f64>, EncoderError> {
        let v = DVector::from_column_slice(x.as_slice());
        let pinv = self
            .g
            .clone()
            .pseudo_inverse(1e-12)
            .map_err(|e| EncoderError::Invalid(e.to_string()))?;
        let z = pinv * v / C64::new(self.scale, 0.0);
        Ok(decomplexify(z.as_slice(), self.m))
    }

    pub fn save(&self, path: &Path) -> Result<(), EncoderError> {
        let header = json!({
            "format": "linear_encoder",
            "rows": self.g.nrows(),
            "cols": self.g.ncols(),
            "m": self.m,
            "n_f": self.n_f,
            "t_data": self.t_data,
            "scale": self.scale,
            "power_p": self.power_p,
        });
        write_blob(path, &header, &complex_payload(self.g.as_slice()))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, EncoderError> {
        let (h, p) = read_blob(path)?;
        let get = |k: &str| {
            h[k].as_u64()
                .map(|v| v as usize)
                .ok_or_else(|| EncoderError::Invalid(k.into()))
        };
        let getf = |k: &str| h[k].as_f64().ok_or_else(|| EncoderError::Invalid(k.into()));
        if h["format"] != "linear_encoder" {
            return Err(EncoderError::Invalid("not a linear_encoder file".into()));
        }
        let g = CMatrix::from_column_slice(get("rows")?, get("cols")?, &complex_from_payload(&p)?);
        Self::new(
            g,
            getf("scale")?,
            get("m")?,
            get("n_f")?,
            get("t_data")?,
            getf("power_p")?,
        )
    }
}
