use std::time::Instant;

use baselines::separate_estimate;
use channel_sim::{
    circular_gaussian_prior, generate_channel, kron_exponential_covariance, transmit,
    ChannelTensor, SystemDims, TransmitTensor,
};
use encoders::block::assemble_unchecked;
use encoders::{assemble_block, source_energy, subspace_source_prior, LinearEncoder, PilotScheme};
use flow_priors::{GmmPrior, MlpVf, VelocityField};
use pfm_decoder::{pfm_decode, LikelihoodModel, PfmConfig, PfmPriors, TransmitModel};
use tensor_core::rng::{split_seed, stream_rng};
use tensor_core::{CMatrix, CTensor3};

use crate::config::{ExperimentConfig, SchemeSpec};
use crate::error::HarnessError;
use crate::metrics::{compute_metrics, Metrics, Outcome};

const PILOT_SALT: u64 = 0x5049_4c4f;
const ENCODER_SALT: u64 = 0x454e_4344;
const SOURCE_SALT: u64 = 0x5352_4350;
const TUNE_SALT: u64 = 0x5455_4e45;

/// Channel, per-transmitter sources and codewords of one draw.
type DrawParts = (ChannelTensor, Vec<Vec<f64>>, Vec<CMatrix>);

/// Channel model shared by every series.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub cfg: ExperimentConfig,
    pub dims: SystemDims,
    pub covariance: CMatrix,
    pub channel_prior: GmmPrior,
}

/// One pilot arrangement at one source dimension, with its fixed encoders.
pub struct Series {
    pub spec: SchemeSpec,
    pub cbr: f64,
    pub source_dim: usize,
    pub scheme: PilotScheme,
    pub source_prior: GmmPrior,
    pub source_model: Option<MlpVf>,
    pub encoders: Vec<LinearEncoder>,
}

impl Series {
    pub fn source_field(&self) -> &dyn VelocityField {
        match &self.source_model {
            Some(net) => net,
            None => &self.source_prior,
        }
    }
}

/// Ground truth and observation of one trial.
#[derive(Debug, Clone)]
pub struct TrialData {
    pub h: ChannelTensor,
    pub s: Vec<Vec<f64>>,
    pub x: TransmitTensor,
    pub y: CTensor3,
}

impl TrialData {
    pub fn outcome(&self) -> Outcome<'_> {
        Outcome {
            h: &self.h.h,
            x: &self.x.x,
            s: &self.s,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub h: ChannelTensor,
    pub s: Vec<Vec<f64>>,
    pub x: CTensor3,
    pub metrics: Metrics,
    pub runtime_ms: f64,
    pub trace: Vec<pfm_decoder::TraceRow>,
}

/// Seed of trial `k`; the same draws are reused across grid points.
pub fn trial_seed(master: u64, k: usize) -> u64 {
    split_seed(master, k as u64)
}

pub fn tuning_seed(master: u64, k: usize) -> u64 {
    split_seed(master ^ TUNE_SALT, k as u64)
}

impl Experiment {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let dims = cfg.dims.system();
        let covariance = kron_exponential_covariance(
            dims.n_f,
            dims.n_t,
            dims.n_r,
            cfg.channel_prior.rho_f,
            cfg.channel_prior.rho_r,
        );
        let channel_prior = circular_gaussian_prior(&covariance)?;
        Ok(Self {
            cfg: cfg.clone(),
            dims,
            covariance,
            channel_prior,
        })
    }

    /// Noise variance for a target CSNR, assuming unit-average transmit symbols of power
    /// `P`: `σ² = n_t·P·tr(C)/(n_f n_t n_r)/10^(csnr/10)`.
    pub fn noise_var(&self, csnr_db: f64) -> f64 {
        let d = &self.dims;
        let mean_gain = self.covariance.trace().re / (d.n_f * d.n_t * d.n_r) as f64;
        d.n_t as f64 * d.power_p * mean_gain / 10f64.powf(csnr_db / 10.0)
    }

    pub fn series(&self, spec: SchemeSpec, cbr: f64) -> Result<Series, HarnessError> {
        let cfg = &self.cfg;
        let m = cfg.source_dim(cbr)?;
        let scheme = spec.build(&self.dims, split_seed(cfg.seed, PILOT_SALT))?;
        let sp = &cfg.source_prior;
        let latent = ((sp.latent_fraction * m as f64).round() as usize).clamp(1, m);
        let source_prior = subspace_source_prior(
            m,
            latent,
            sp.lambda,
            sp.offset_energy,
            split_seed(cfg.seed ^ SOURCE_SALT, m as u64),
        )?;
        let energy = source_energy(&source_prior);
        let t_data = scheme.t_data(self.dims.t_s);
        let encoders = (0..self.dims.n_t)
            .map(|k| {
                let seed = split_seed(
                    split_seed(cfg.seed ^ ENCODER_SALT, m as u64),
                    (t_data * 16 + k) as u64,
                );
                LinearEncoder::random_orthonormal(
                    self.dims.n_f,
                    t_data,
                    m,
                    self.dims.power_p,
                    energy,
                    seed,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let source_model = match &cfg.pfm.source_checkpoint {
            Some(path) => {
                let net = MlpVf::load(path)
                    .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
                if net.dim() != m {
                    return Err(HarnessError::Config(format!(
                        "checkpoint dimension {} does not match source dimension {m}",
                        net.dim()
                    )));
                }
                Some(net)
            }
            None => None,
        };
        Ok(Series {
            spec,
            cbr,
            source_dim: m,
            scheme,
            source_prior,
            source_model,
            encoders,
        })
    }

    /// Channel, sources, block and observation of one trial. Fails when a codeword or a
    /// transmitter exceeds its energy limit.
    pub fn draw(
        &self,
        series: &Series,
        noise_var: f64,
        seed: u64,
    ) -> Result<TrialData, HarnessError> {
        let (h, s, cws) = self.draw_unchecked_parts(series, seed)?;
        for (enc, sk) in series.encoders.iter().zip(&s) {
            enc.encode(sk)?;
        }
        let x = assemble_block(&cws, &series.scheme, self.dims.t_s, self.dims.power_p)?;
        let y = transmit(&x, &h, noise_var, split_seed(seed, 2))?.y;
        Ok(TrialData { h, s, x, y })
    }

    fn draw_unchecked_parts(&self, series: &Series, seed: u64) -> Result<DrawParts, HarnessError> {
        let h = generate_channel(&self.channel_prior, &self.dims, split_seed(seed, 0))?;
        let s: Vec<Vec<f64>> = (0..self.dims.n_t)
            .map(|k| {
                series
                    .source_prior
                    .sample(&mut stream_rng(split_seed(seed, 1), k as u64))
            })
            .collect();
        let cws = series
            .encoders
            .iter()
            .zip(&s)
            .map(|(e, sk)| e.encode_unchecked(sk))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((h, s, cws))
    }

    /// `(X, H)` pair of a trial without energy checks, for bound ensembles.
    pub fn draw_pair(
        &self,
        series: &Series,
        seed: u64,
    ) -> Result<(TransmitTensor, ChannelTensor), HarnessError> {
        let (h, _, cws) = self.draw_unchecked_parts(series, seed)?;
        let x = assemble_unchecked(&cws, &series.scheme, self.dims.t_s)?;
        Ok((TransmitTensor { x }, h))
    }

    pub fn likelihood(
        &self,
        series: &Series,
        data: &TrialData,
        noise_var: f64,
    ) -> Result<LikelihoodModel, HarnessError> {
        let mut dims = self.dims;
        dims.noise_var = noise_var;
        Ok(LikelihoodModel::new(
            dims,
            data.y.clone(),
            TransmitModel::Encoded {
                encoders: series.encoders.clone(),
                scheme: series.scheme.clone(),
            },
            noise_var,
        )?)
    }

    pub fn pfm_config(&self, beta: Option<f64>, seed: u64) -> PfmConfig {
        let p = &self.cfg.pfm;
        let (bh, bs) = beta.map_or((p.beta_h, p.beta_s), |b| (b, b));
        let mut c = PfmConfig::new(p.delta_tau, bh, vec![bs; self.dims.n_t], seed);
        c.guidance = p.guidance;
        c.n_avg = p.n_avg;
        c
    }

    pub fn run_pfm(
        &self,
        series: &Series,
        data: &TrialData,
        noise_var: f64,
        beta: Option<f64>,
        seed: u64,
        with_trace: bool,
    ) -> Result<Estimate, HarnessError> {
        let start = Instant::now();
        let lm = self.likelihood(series, data, noise_var)?;
        let fields: Vec<&dyn VelocityField> =
            (0..self.dims.n_t).map(|_| series.source_field()).collect();
        let priors = PfmPriors {
            h: &self.channel_prior,
            s: &fields,
        };
        let truth = with_trace.then_some(pfm_decoder::Truth {
            h: &data.h,
            x: &data.x.x,
        });
        let out = pfm_decode(
            &lm,
            priors,
            &self.pfm_config(beta, split_seed(seed, 3)),
            truth,
        )?;
        let x = lm.transmit_block(&out.s)?;
        let metrics = compute_metrics(
            data.outcome(),
            Outcome {
                h: &out.h.h,
                x: &x,
                s: &out.s,
            },
        )?;
        Ok(Estimate {
            h: out.h,
            s: out.s,
            x,
            metrics,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
            trace: out.trace,
        })
    }

    pub fn run_lmmse(
        &self,
        series: &Series,
        data: &TrialData,
        noise_var: f64,
    ) -> Result<Estimate, HarnessError> {
        let start = Instant::now();
        let est = separate_estimate(
            &data.y,
            &self.dims,
            &series.scheme,
            &series.encoders,
            &self.covariance,
            noise_var,
        )?;
        let metrics = compute_metrics(
            data.outcome(),
            Outcome {
                h: &est.h.h,
                x: &est.x,
                s: &est.s,
            },
        )?;
        Ok(Estimate {
            h: est.h,
            s: est.s,
            x: est.x,
            metrics,
            runtime_ms: start.elapsed().as_secs_f64() * 1e3,
            trace: vec![],
        })
    }
}
