use channel_sim::{ChannelTensor, SystemDims, TransmitTensor};
use encoders::block::assemble_unchecked;
use encoders::{data_gain, data_symbol_offset, LinearEncoder, PilotScheme};
use tensor_core::iso::stack;
use tensor_core::{CMatrix, CTensor3, C64};

use crate::error::PfmError;

/// How the transmit block depends on the unknowns.
#[derive(Debug, Clone)]
pub enum TransmitModel {
    /// Fully known block (pilot-only transmission).
    Known(TransmitTensor),
    /// `X = assemble_block(encode_k(s_k), scheme)`.
    Encoded {
        encoders: Vec<LinearEncoder>,
        scheme: PilotScheme,
    },
}

/// Gaussian likelihood `log p(Y | H, {s_k}) = −‖Y − X(s)H‖²_F/σ² − N·ln(πσ²)`.
#[derive(Debug, Clone)]
pub struct LikelihoodModel {
    pub dims: SystemDims,
    pub y: CTensor3,
    pub model: TransmitModel,
    pub noise_var: f64,
    jacobians: Vec<CMatrix>,
}

/// Likelihood scores at one point, with the residual norm `‖Y − XH‖_F`.
#[derive(Debug, Clone)]
pub struct Scores {
    pub h: Vec<f64>,
    pub s: Vec<Vec<f64>>,
    pub residual_norm: f64,
}

impl LikelihoodModel {
    pub fn new(
        dims: SystemDims,
        y: CTensor3,
        model: TransmitModel,
        noise_var: f64,
    ) -> Result<Self, PfmError> {
        if y.dims() != dims.receive_shape() {
            return Err(PfmError::ShapeMismatch(format!(
                "Y is {:?}, expected {:?}",
                y.dims(),
                dims.receive_shape()
            )));
        }
        if !(noise_var > 0.0) {
            return Err(PfmError::InvalidConfig("noise_var must be positive".into()));
        }
        let jacobians = match &model {
            TransmitModel::Known(x) => {
                if x.x.dims() != dims.transmit_shape() {
                    return Err(PfmError::ShapeMismatch("known X has wrong shape".into()));
                }
                vec![]
            }
            TransmitModel::Encoded { encoders, scheme } => {
                if encoders.len() != dims.n_t {
                    return Err(PfmError::ShapeMismatch(format!(
                        "{} encoders for n_t = {}",
                        encoders.len(),
                        dims.n_t
                    )));
                }
                let t_data = scheme.t_data(dims.t_s);
                if encoders
                    .iter()
                    .any(|e| e.n_f() != dims.n_f || e.t_data() != t_data)
                {
                    return Err(PfmError::ShapeMismatch(
                        "encoder output does not fit the data region".into(),
                    ));
                }
                encoders.iter().map(|e| e.jacobian()).collect()
            }
        };
        Ok(Self {
            dims,
            y,
            model,
            noise_var,
            jacobians,
        })
    }

    /// Source dimensions per transmitter (empty for a known block).
    pub fn source_dims(&self) -> Vec<usize> {
        match &self.model {
            TransmitModel::Known(_) => vec![],
            TransmitModel::Encoded { encoders, .. } => {
                encoders.iter().map(|e| e.source_dim()).collect()
            }
        }
    }

    /// `X(s)` without power checks.
    pub fn transmit_block(&self, s: &[Vec<f64>]) -> Result<CTensor3, PfmError> {
        match &self.model {
            TransmitModel::Known(x) => Ok(x.x.clone()),
            TransmitModel::Encoded { encoders, scheme } => {
                if s.len() != encoders.len() {
                    return Err(PfmError::ShapeMismatch(format!(
                        "{} sources for {} encoders",
                        s.len(),
                        encoders.len()
                    )));
                }
                let cw = encoders
                    .iter()
                    .zip(s)
                    .map(|(e, sk)| e.encode_unchecked(sk))
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(assemble_unchecked(&cw, scheme, self.dims.t_s)?)
            }
        }
    }

    fn check_h(&self, h: &CTensor3) -> Result<(), PfmError> {
        if h.dims() != self.dims.channel_shape() {
            return Err(PfmError::ShapeMismatch(format!("H is {:?}", h.dims())));
        }
        Ok(())
    }

    /// `Y − X H` per subcarrier.
    pub fn residual(&self, x: &CTensor3, h: &CTensor3) -> CTensor3 {
        let SystemDims {
            n_f, n_t, n_r, t_s, ..
        } = self.dims;
        let mut r = self.y.clone();
        for rr in 0..n_r {
            for k in 0..n_t {
                for t in 0..t_s {
                    for f in 0..n_f {
                        let v = r.get(f, t, rr) - x.get(f, t, k) * h.get(f, k, rr);
                        r.set(f, t, rr, v);
                    }
                }
            }
        }
        r
    }

    pub fn log_likelihood(&self, h: &ChannelTensor, s: &[Vec<f64>]) -> Result<f64, PfmError> {
        self.check_h(&h.h)?;
        let x = self.transmit_block(s)?;
        let r = self.residual(&x, &h.h);
        let n = r.len() as f64;
        Ok(-r.norm_sqr() / self.noise_var - n * (std::f64::consts::PI * self.noise_var).ln())
    }

    /// Real-embedding gradient of the log-likelihood with respect to `H`.
    pub fn score_h(&self, h: &ChannelTensor, s: &[Vec<f64>]) -> Result<Vec<f64>, PfmError> {
        Ok(self.scores(&h.h, s)?.h)
    }

    /// Gradient of the log-likelihood with respect to source `k`.
    pub fn score_s(
        &self,
        h: &ChannelTensor,
        s: &[Vec<f64>],
        k: usize,
    ) -> Result<Vec<f64>, PfmError> {
        self.scores(&h.h, s)?
            .s
            .into_iter()
            .nth(k)
            .ok_or_else(|| PfmError::ShapeMismatch(format!("no source {k}")))
    }

    /// All likelihood gradients at `(H, s)` from one residual evaluation.
    ///
    /// Per subcarrier `∇_{H_f*} = X_fᴴ R_f/σ²` and `∇_{X_f*} = R_f H_fᴴ/σ²`; real gradients
    /// are twice the conjugate-Wirtinger scores, and sources pull `∇_{X*}` back through
    /// the encoder Jacobian at data positions.
    pub fn scores(&self, h: &CTensor3, s: &[Vec<f64>]) -> Result<Scores, PfmError> {
        self.check_h(h)?;
        let x = self.transmit_block(s)?;
        let r = self.residual(&x, h);
        let SystemDims {
            n_f, n_t, n_r, t_s, ..
        } = self.dims;
        let inv = 1.0 / self.noise_var;
        let mut gh = CTensor3::zeros(self.dims.channel_shape());
        for rr in 0..n_r {
            for k in 0..n_t {
                for f in 0..n_f {
                    let mut acc = C64::new(0.0, 0.0);
                    for t in 0..t_s {
                        acc += x.get(f, t, k).conj() * r.get(f, t, rr);
                    }
                    gh.set(f, k, rr, acc * inv);
                }
            }
        }
        let h_real: Vec<f64> = stack(gh.data()).into_iter().map(|v| 2.0 * v).collect();
        let mut s_real = Vec::new();
        if let TransmitModel::Encoded { scheme, .. } = &self.model {
            let off = data_symbol_offset(scheme);
            let t_data = scheme.t_data(t_s);
            let gain = data_gain(scheme);
            for k in 0..n_t {
                let mut gx = vec![C64::new(0.0, 0.0); n_f * t_data];
                for t in 0..t_data {
                    for f in 0..n_f {
                        let mut acc = C64::new(0.0, 0.0);
                        for rr in 0..n_r {
                            acc += r.get(f, off + t, rr) * h.get(f, k, rr).conj();
                        }
                        gx[f + n_f * t] = acc * inv;
                    }
                }
                let j = &self.jacobians[k];
                let grad: Vec<f64> = (0..j.ncols())
                    .map(|c| {
                        let dot: C64 = j.column(c).iter().zip(&gx).map(|(a, b)| a.conj() * b).sum();
                        2.0 * gain * dot.re
                    })
                    .collect();
                s_real.push(grad);
            }
        }
        Ok(Scores {
            h: h_real,
            s: s_real,
            residual_norm: r.norm_sqr().sqrt(),
        })
    }

    /// Mean eigenvalue of the channel observation operator, `‖X‖²/(n_f·n_t)`.
    pub(crate) fn channel_gain(&self, x: &CTensor3) -> f64 {
        x.norm_sqr() / (self.dims.n_f * self.dims.n_t) as f64
    }

    /// Mean eigenvalue of source `k`'s observation operator:
    /// `gain²·‖J_k‖²_F/m_k · mean_f ‖H_{f,k,:}‖²`.
    pub(crate) fn source_gain(&self, h: &CTensor3, k: usize) -> f64 {
        let TransmitModel::Encoded { scheme, .. } = &self.model else {
            return 0.0;
        };
        let j = &self.jacobians[k];
        let per_dim = data_gain(scheme).powi(2) * j.norm_squared() / j.ncols() as f64;
        let SystemDims { n_f, n_r, .. } = self.dims;
        let mut hk = 0.0;
        for r in 0..n_r {
            for f in 0..n_f {
                hk += h.get(f, k, r).norm_sqr();
            }
        }
        per_dim * hk / n_f as f64
    }
}
