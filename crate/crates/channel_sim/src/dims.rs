use serde::{Deserialize, Serialize};

use crate::error::ChannelError;

/// System dimensions and power settings (linear units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemDims {
    pub n_f: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub t_s: usize,
    pub power_p: f64,
    pub noise_var: f64,
}

impl SystemDims {
    pub fn new(n_f: usize, n_t: usize, n_r: usize, t_s: usize) -> Self {
        Self {
            n_f,
            n_t,
            n_r,
            t_s,
            power_p: 1.0,
            noise_var: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if self.n_f == 0 || self.n_t == 0 || self.n_r == 0 || self.t_s == 0 {
            return Err(ChannelError::InvalidDims(format!(
                "all counts must be >= 1, got {}x{}x{}x{}",
                self.n_f, self.n_t, self.n_r, self.t_s
            )));
        }
        if !(self.power_p > 0.0) || !(self.noise_var > 0.0) {
            return Err(ChannelError::InvalidDims(
                "power_p and noise_var must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn channel_shape(&self) -> (usize, usize, usize) {
        (self.n_f, self.n_t, self.n_r)
    }

    pub fn transmit_shape(&self) -> (usize, usize, usize) {
        (self.n_f, self.t_s, self.n_t)
    }

    pub fn receive_shape(&self) -> (usize, usize, usize) {
        (self.n_f, self.t_s, self.n_r)
    }

    /// Real dimension of the channel embedding, `2·n_f·n_t·n_r`.
    pub fn channel_real_dim(&self) -> usize {
        2 * self.n_f * self.n_t * self.n_r
    }

    /// Per-transmitter energy budget `n_f·t_s·P`.
    pub fn budget(&self) -> f64 {
        (self.n_f * self.t_s) as f64 * self.power_p
    }

    /// Side of the joint FIM, `n_f·n_t·(t_s + n_r)`.
    pub fn fim_side(&self) -> usize {
        self.n_f * self.n_t * (self.t_s + self.n_r)
    }
}
