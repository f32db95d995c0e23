use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;
use tensor_core::blob::{read_blob, write_blob};
use tensor_core::rng::{normal_vec, stream_rng};

use crate::error::FlowError;
use crate::gmm::GmmPrior;
use crate::path::{ot_path_sample_with, score_from_vf};
use crate::VelocityField;

/// Extra input features appended to `x`: `τ, sin(πτ), cos(πτ)`.
pub const TAU_FEATURES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Silu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Silu => z / (1.0 + (-z).exp()),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - z.tanh().powi(2),
            Activation::Silu => {
                let s = 1.0 / (1.0 + (-z).exp());
                s * (1.0 + z * (1.0 - s))
            }
        }
    }

    fn name(self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Silu => "silu",
        }
    }
}

/// Fully connected velocity field `v(x, τ)`; `widths = [d, h_1, ..., d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpVf {
    widths: Vec<usize>,
    activation: Activation,
    weights: Vec<DMatrix<f64>>,
    biases: Vec<DVector<f64>>,
    /// Per-coordinate variance of the training data.
    pub data_variance: f64,
    pub training_seed: u64,
    pub final_loss: f64,
}

struct Tape {
    pre: Vec<DVector<f64>>,
    post: Vec<DVector<f64>>,
}

impl MlpVf {
    pub fn new(widths: &[usize], activation: Activation, seed: u64) -> Result<Self, FlowError> {
        if widths.len() < 2 || widths[0] != *widths.last().unwrap() || widths.contains(&0) {
            return Err(FlowError::InvalidPrior(format!("bad widths {widths:?}")));
        }
        let mut rng = stream_rng(seed, 0);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..widths.len() - 1 {
            let fan_in = if l == 0 {
                widths[0] + TAU_FEATURES
            } else {
                widths[l]
            };
            let fan_out = widths[l + 1];
            let s = (1.0 / fan_in as f64).sqrt();
            let w = normal_vec(&mut rng, fan_out * fan_in);
            weights.push(DMatrix::from_vec(
                fan_out,
                fan_in,
                w.iter().map(|v| v * s).collect(),
            ));
            biases.push(DVector::zeros(fan_out));
        }
        Ok(Self {
            widths: widths.to_vec(),
            activation,
            weights,
            biases,
            data_variance: 1.0,
            training_seed: seed,
            final_loss: f64::NAN,
        })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn n_params(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    /// Parameters flattened layer by layer: weights (column-major) then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_params());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            p.extend_from_slice(w.as_slice());
            p.extend_from_slice(b.as_slice());
        }
        p
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<(), FlowError> {
        if p.len() != self.n_params() {
            return Err(FlowError::DimMismatch {
                expected: self.n_params(),
                got: p.len(),
            });
        }
        let mut off = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let n = w.len();
            w.as_mut_slice().copy_from_slice(&p[off..off + n]);
            off += n;
            let n = b.len();
            b.as_mut_slice().copy_from_slice(&p[off..off + n]);
            off += n;
        }
        Ok(())
    }

    fn features(&self, x: &[f64], tau: f64) -> DVector<f64> {
        let d = self.widths[0];
        let mut f = DVector::zeros(d + TAU_FEATURES);
        f.rows_mut(0, d).copy_from_slice(x);
        let a = std::f64::consts::PI * tau;
        f[d] = tau;
        f[d + 1] = a.sin();
        f[d + 2] = a.cos();
        f
    }

    fn forward_tape(&self, x: &[f64], tau: f64) -> Tape {
        let mut post = vec![self.features(x, tau)];
        let mut pre = Vec::new();
        let last = self.weights.len() - 1;
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let z = w * post.last().unwrap() + b;
            let a = if l == last {
                z.clone()
            } else {
                z.map(|v| self.activation.apply(v))
            };
            pre.push(z);
            post.push(a);
        }
        Tape { pre, post }
    }

    pub fn forward(&self, x: &[f64], tau: f64) -> Vec<f64> {
        self.forward_tape(x, tau)
            .post
            .last()
            .unwrap()
            .as_slice()
            .to_vec()
    }

    /// Mean CFM loss `‖v(x_i, τ_i) − u_i‖²` over a batch and its gradient in [`MlpVf::params`] order.
    pub fn loss_and_grad(
        &self,
        xs: &[Vec<f64>],
        taus: &[f64],
        targets: &[Vec<f64>],
    ) -> (f64, Vec<f64>) {
        let nl = self.weights.len();
        let mut gw: Vec<DMatrix<f64>> = self
            .weights
            .iter()
            .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
            .collect();
        let mut gb: Vec<DVector<f64>> = self
            .biases
            .iter()
            .map(|b| DVector::zeros(b.len()))
            .collect();
        let bsz = xs.len() as f64;
        let mut loss = 0.0;
        for ((x, &tau), u) in xs.iter().zip(taus).zip(targets) {
            let tape = self.forward_tape(x, tau);
            let out = tape.post.last().unwrap();
            let diff = out - DVector::from_column_slice(u);
            loss += diff.norm_squared();
            let mut delta = diff * (2.0 / bsz);
            for l in (0..nl).rev() {
                if l != nl - 1 {
                    let act = self.activation;
                    delta.zip_apply(&tape.pre[l], |d, z| *d *= act.derivative(z));
                }
                gw[l] += &delta * tape.post[l].transpose();
                gb[l] += &delta;
                if l > 0 {
                    delta = self.weights[l].tr_mul(&delta);
                }
            }
        }
        let mut g = Vec::with_capacity(self.n_params());
        for (w, b) in gw.iter().zip(&gb) {
            g.extend_from_slice(w.as_slice());
            g.extend_from_slice(b.as_slice());
        }
        (loss / bsz, g)
    }

    pub fn save(&self, path: &Path) -> Result<(), FlowError> {
        let header = json!({
            "format": "mlp_vf",
            "widths": self.widths,
            "activation": self.activation.name(),
            "training_seed": self.training_seed,
            "final_loss": if self.final_loss.is_finite() { json!(self.final_loss) } else { json!(null) },
            "data_variance": self.data_variance,
        });
        write_blob(path, &header, &self.params())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, FlowError> {
        let (h, p) = read_blob(path)?;
        let bad = |m: &str| FlowError::Checkpoint(m.to_string());
        if h["format"] != "mlp_vf" {
            return Err(bad("not an mlp_vf checkpoint"));
        }
        let widths: Vec<usize> =
            serde_json::from_value(h["widths"].clone()).map_err(|e| bad(&e.to_string()))?;
        let activation: Activation =
            serde_json::from_value(h["activation"].clone()).map_err(|e| bad(&e.to_string()))?;
        let seed = h["training_seed"]
            .as_u64()
            .ok_or_else(|| bad("training_seed"))?;
        let mut net = Self::new(&widths, activation, seed)?;
        net.set_params(&p)?;
        net.final_loss = h["final_loss"].as_f64().unwrap_or(f64::NAN);
        net.data_variance = h["data_variance"]
            .as_f64()
            .ok_or_else(|| bad("data_variance"))?;
        Ok(net)
    }
}

impl VelocityField for MlpVf {
    fn dim(&self) -> usize {
        self.widths[0]
    }

    fn velocity(&self, x: &[f64], tau: f64) -> Result<Vec<f64>, FlowError> {
        if x.len() != self.widths[0] {
            return Err(FlowError::DimMismatch {
                expected: self.widths[0],
                got: x.len(),
            });
        }
        Ok(self.forward(x, tau))
    }

    fn mean_variance(&self) -> f64 {
        self.data_variance
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 1000,
            lr: 1e-2,
            batch: 64,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub final_loss: f64,
    pub losses: Vec<f64>,
}

/// Conditional flow matching with Adam on `E‖v(x(τ), τ) − (x1 − x0)‖²`, τ uniform.
pub fn cfm_train(
    data: &[Vec<f64>],
    net: &MlpVf,
    cfg: &TrainConfig,
) -> Result<(MlpVf, TrainReport), FlowError> {
    if data.is_empty() {
        return Err(FlowError::EmptyDataset);
    }
    let d = net.widths[0];
    if let Some(x) = data.iter().find(|x| x.len() != d) {
        return Err(FlowError::DimMismatch {
            expected: d,
            got: x.len(),
        });
    }
    let mut net = net.clone();
    let n = data.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|j| data.iter().map(|x| x[j]).sum::<f64>() / n)
        .collect();
    net.data_variance = (0..d)
        .map(|j| data.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n)
        .sum::<f64>()
        / d as f64;
    net.training_seed = cfg.seed;
    if cfg.steps == 0 {
        return Ok((
            net.clone(),
            TrainReport {
                final_loss: net.final_loss,
                losses: vec![],
            },
        ));
    }
    let mut rng = stream_rng(cfg.seed, 1);
    let mut p = net.params();
    let mut m1 = vec![0.0; p.len()];
    let mut m2 = vec![0.0; p.len()];
    let (b1, b2, eps) = (0.9, 0.999, 1e-8);
    let mut losses = Vec::with_capacity(cfg.steps);
    for step in 0..cfg.steps {
        let mut xs = Vec::with_capacity(cfg.batch);
        let mut taus = Vec::with_capacity(cfg.batch);
        let mut targets = Vec::with_capacity(cfg.batch);
        for _ in 0..cfg.batch {
            let x0 = &data[rng.random_range(0..data.len())];
            let tau: f64 = rng.random();
            let (fs, x1) = ot_path_sample_with(x0, tau, &mut rng)?;
            targets.push(x1.iter().zip(x0).map(|(a, b)| a - b).collect());
            xs.push(fs.x_tau);
            taus.push(tau);
        }
        let (loss, g) = net.loss_and_grad(&xs, &taus, &targets);
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(FlowError::Divergence { step, loss });
        }
        let t = (step + 1) as i32;
        for i in 0..p.len() {
            m1[i] = b1 * m1[i] + (1.0 - b1) * g[i];
            m2[i] = b2 * m2[i] + (1.0 - b2) * g[i] * g[i];
            let mh = m1[i] / (1.0 - b1.powi(t));
            let vh = m2[i] / (1.0 - b2.powi(t));
            p[i] -= cfg.lr * mh / (vh.sqrt() + eps);
        }
        net.set_params(&p)?;
        losses.push(loss);
    }
    let tail = losses.len().min(50);
    let final_loss = losses[losses.len() - tail..].iter().sum::<f64>() / tail as f64;
    net.final_loss = final_loss;
    Ok((net, TrainReport { final_loss, losses }))
}

/// Monte-Carlo estimate of `ε·E‖s_net(x(ε)) − ∇log p_ε(x(ε))‖₂`, with `s_net` from the VF.
pub fn score_error(
    net: &dyn VelocityField,
    prior: &GmmPrior,
    eps: f64,
    n_samples: usize,
    seed: u64,
) -> Result<f64, FlowError> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(FlowError::TauOutOfRange(eps));
    }
    let mut rng = stream_rng(seed, 2);
    let mut acc = 0.0;
    for _ in 0..n_samples {
        let x0 = prior.sample(&mut rng);
        let (fs, _) = ot_path_sample_with(&x0, eps, &mut rng)?;
        let s_net = score_from_vf(&fs, &net.velocity(&fs.x_tau, eps)?)?;
        let s_true = prior.score(&fs.x_tau, eps)?;
        acc += s_net
            .iter()
            .zip(&s_true)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
    }
    Ok(eps * acc / n_samples as f64)
}
