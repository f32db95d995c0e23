use std::path::{Path, PathBuf};

use channel_sim::SystemDims;
use encoders::PilotScheme;
use flow_priors::Activation;
use pfm_decoder::Guidance;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DimsConfig {
    pub n_f: usize,
    pub n_t: usize,
    pub n_r: usize,
    pub t_s: usize,
    pub power_p: f64,
}

impl Default for DimsConfig {
    fn default() -> Self {
        Self {
            n_f: 4,
            n_t: 2,
            n_r: 8,
            t_s: 6,
            power_p: 1.0,
        }
    }
}

impl DimsConfig {
    pub fn system(&self) -> SystemDims {
        let mut d = SystemDims::new(self.n_f, self.n_t, self.n_r, self.t_s);
        d.power_p = self.power_p;
        d
    }
}

/// Kronecker exponential-correlation Gaussian channel prior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelPriorConfig {
    pub rho_f: f64,
    pub rho_r: f64,
}

impl Default for ChannelPriorConfig {
    fn default() -> Self {
        Self {
            rho_f: 0.7,
            rho_r: 0.5,
        }
    }
}

/// Gaussian source prior on an affine subspace of dimension `latent_fraction·m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourcePriorConfig {
    pub latent_fraction: f64,
    pub lambda: f64,
    pub offset_energy: f64,
}

impl Default for SourcePriorConfig {
    fn default() -> Self {
        Self {
            latent_fraction: 0.5,
            lambda: 0.5,
            offset_energy: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PfmSettings {
    pub delta_tau: f64,
    pub beta_h: f64,
    pub beta_s: f64,
    pub guidance: Guidance,
    pub n_avg: usize,
    /// When non-empty, a common `β` for all variables is picked per grid point from this
    /// grid on separate tuning trials.
    pub beta_grid: Vec<f64>,
    pub tune_trials: usize,
    /// Trained velocity-field checkpoint used as the source prior instead of the exact one.
    pub source_checkpoint: Option<PathBuf>,
}

impl Default for PfmSettings {
    fn default() -> Self {
        Self {
            delta_tau: 0.02,
            beta_h: 1.0,
            beta_s: 1.0,
            guidance: Guidance::Weighted,
            n_avg: 1,
            beta_grid: vec![0.3, 1.0, 3.0, 10.0],
            tune_trials: 4,
            source_checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub csnr_db: Vec<f64>,
    /// Channel uses per source dimension, `n_f·t_s/m`.
    pub cbr: Vec<f64>,
    /// Orthogonal pilot fractions; `0` means no pilots.
    pub alpha: Vec<f64>,
    /// Superimposed pilot power fractions.
    pub sp_rho: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            csnr_db: vec![0.0, 10.0],
            cbr: vec![1.0, 2.0, 4.0],
            alpha: vec![0.0, 0.5],
            sp_rho: vec![0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundConfig {
    /// Smoothing level of the source-induced transmit prior.
    pub eps: f64,
    pub n_samples: usize,
}

impl Default for BoundConfig {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            n_samples: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub steps: usize,
    pub lr: f64,
    pub batch: usize,
    pub n_data: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self {
            hidden: vec![32, 32],
            activation: Activation::Tanh,
            steps: 2000,
            lr: 2e-3,
            batch: 128,
            n_data: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub n_trials: usize,
    /// Worker threads for trials; `0` uses the global pool.
    pub workers: usize,
    pub output: PathBuf,
    pub dims: DimsConfig,
    pub channel_prior: ChannelPriorConfig,
    pub source_prior: SourcePriorConfig,
    pub pfm: PfmSettings,
    pub sweep: SweepConfig,
    pub bound: BoundConfig,
    pub train: TrainSettings,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_trials: 20,
            workers: 0,
            output: PathBuf::from("out"),
            dims: DimsConfig::default(),
            channel_prior: ChannelPriorConfig::default(),
            source_prior: SourcePriorConfig::default(),
            pfm: PfmSettings::default(),
            sweep: SweepConfig::default(),
            bound: BoundConfig::default(),
            train: TrainSettings::default(),
        }
    }
}

/// Pilot arrangement of one sweep series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum SchemeSpec {
    None,
    Orthogonal(f64),
    Superimposed(f64),
}

impl SchemeSpec {
    pub fn label(&self) -> &'static str {
        match self {
            Self::None => "none",
            Self::Orthogonal(_) => "op",
            Self::Superimposed(_) => "sp",
        }
    }

    pub fn param(&self) -> f64 {
        match self {
            Self::None => 0.0,
            Self::Orthogonal(a) | Self::Superimposed(a) => *a,
        }
    }

    pub fn build(&self, dims: &SystemDims, seed: u64) -> Result<PilotScheme, HarnessError> {
        Ok(match self {
            Self::None => PilotScheme::none(),
            Self::Orthogonal(a) => {
                PilotScheme::orthogonal(*a, dims.n_f, dims.t_s, dims.n_t, dims.power_p, seed)?
            }
            Self::Superimposed(r) => {
                PilotScheme::superimposed(*r, dims.n_f, dims.t_s, dims.n_t, dims.power_p, seed)?
            }
        })
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg = Self::parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validation, so command-line overrides can be applied first.
    pub fn parse_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let cfg = Self::load_unvalidated(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load_unvalidated(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse_toml(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical TOML form.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.to_toml_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn schemes(&self) -> Vec<SchemeSpec> {
        let mut out: Vec<SchemeSpec> = self
            .sweep
            .alpha
            .iter()
            .map(|&a| {
                if a == 0.0 {
                    SchemeSpec::None
                } else {
                    SchemeSpec::Orthogonal(a)
                }
            })
            .collect();
        out.extend(
            self.sweep
                .sp_rho
                .iter()
                .map(|&r| SchemeSpec::Superimposed(r)),
        );
        out
    }

    /// Real source dimension for a channel-use ratio.
    pub fn source_dim(&self, cbr: f64) -> Result<usize, HarnessError> {
        let uses = (self.dims.n_f * self.dims.t_s) as f64;
        let m = uses / cbr;
        if !(cbr > 0.0) || (m - m.round()).abs() > 1e-9 || m.round() < 1.0 {
            return Err(HarnessError::Config(format!(
                "cbr {cbr} does not give an integer source dimension"
            )));
        }
        Ok(m.round() as usize)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        self.dims
            .system()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.n_trials == 0 {
            return bad("n_trials must be at least 1");
        }
        if self.sweep.csnr_db.is_empty() || self.sweep.cbr.is_empty() {
            return bad("sweep axes must be non-empty");
        }
        if self.schemes().is_empty() {
            return bad("at least one pilot scheme is required");
        }
        if self.sweep.csnr_db.iter().any(|c| !c.is_finite()) {
            return bad("csnr values must be finite");
        }
        for &cbr in &self.sweep.cbr {
            self.source_dim(cbr)?;
        }
        let sp = &self.source_prior;
        if !(sp.latent_fraction > 0.0 && sp.latent_fraction <= 1.0)
            || !(sp.lambda > 0.0)
            || sp.offset_energy < 0.0
        {
            return bad("invalid source prior");
        }
        let cp = &self.channel_prior;
        if !(0.0..1.0).contains(&cp.rho_f) || !(0.0..1.0).contains(&cp.rho_r) {
            return bad("channel correlations must be in [0, 1)");
        }
        let p = &self.pfm;
        pfm_decoder::PfmConfig::new(p.delta_tau, p.beta_h, vec![], 0)
            .n_steps()
            .map_err(|e| HarnessError::Config(e.to_string()))?;
        if p.n_avg == 0 || p.beta_grid.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return bad("invalid pfm settings");
        }
        if !p.beta_grid.is_empty() && p.tune_trials == 0 {
            return bad("tune_trials must be positive when beta_grid is set");
        }
        if !(self.bound.eps > 0.0 && self.bound.eps < 1.0) || self.bound.n_samples == 0 {
            return bad("invalid bound settings");
        }
        Ok(())
    }
}
