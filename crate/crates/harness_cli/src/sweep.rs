use serde::Serialize;
use tensor_core::par;

use crate::bound::series_bounds;
use crate::config::{ExperimentConfig, SchemeSpec};
use crate::error::HarnessError;
use crate::experiment::{trial_seed, tuning_seed, Experiment, Series};
use crate::metrics::{Metrics, NmseSummary};

/// Failure fraction above which a grid point aborts the sweep.
pub const MAX_FAILURE_RATE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Estimator {
    Pfm,
    Lmmse,
}

impl Estimator {
    pub fn label(&self) -> &'static str {
        match self {
            Self::Pfm => "pfm",
            Self::Lmmse => "lmmse",
        }
    }
}

/// One trial of one estimator. `runtime_ms` is kept out of the CSV.
#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub estimator: &'static str,
    pub scheme: &'static str,
    pub param: f64,
    pub cbr: f64,
    pub csnr_db: f64,
    pub trial: usize,
    pub seed: u64,
    pub beta: f64,
    pub status: String,
    pub nmse_h_db: Option<f64>,
    pub nmse_x_db: Option<f64>,
    pub nmse_s_db: Option<f64>,
    #[serde(skip)]
    pub runtime_ms: f64,
    #[serde(skip)]
    pub metrics: Option<Metrics>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub estimator: &'static str,
    pub scheme: &'static str,
    pub param: f64,
    pub cbr: f64,
    pub csnr_db: f64,
    pub beta: f64,
    pub n_ok: usize,
    pub n_failed: usize,
    pub nmse_h_db: f64,
    pub nmse_h_se_db: f64,
    pub nmse_h_pooled_db: f64,
    pub nmse_x_db: f64,
    pub nmse_x_se_db: f64,
    pub nmse_x_pooled_db: f64,
    pub nmse_s_db: f64,
    pub nmse_s_se_db: f64,
    pub nmse_s_pooled_db: f64,
    pub bcrb_h_db: Option<f64>,
    pub bcrb_x_db: Option<f64>,
    #[serde(skip)]
    pub h: NmseSummary,
    #[serde(skip)]
    pub x: NmseSummary,
    #[serde(skip)]
    pub s: NmseSummary,
    #[serde(skip)]
    pub bcrb_h: Option<f64>,
    #[serde(skip)]
    pub bcrb_x: Option<f64>,
}

impl AggregateRow {
    /// Bound checks allowing one standard error: `(channel ok, transmit ok)`.
    pub fn bound_holds(&self) -> Option<(bool, bool)> {
        let bh = self.bcrb_h?;
        let bx = self.bcrb_x?;
        Some((bh <= self.h.mean + self.h.se, bx <= self.x.mean + self.x.se))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundViolation {
    pub estimator: &'static str,
    pub scheme: &'static str,
    pub cbr: f64,
    pub csnr_db: f64,
    pub metric: &'static str,
    pub nmse_db: f64,
    pub bcrb_db: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub trials: Vec<TrialRecord>,
    pub rows: Vec<AggregateRow>,
    pub failed_trials: usize,
    pub violations: Vec<BoundViolation>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SweepOptions {
    pub with_bcrb: bool,
}

fn estimators(spec: &SchemeSpec) -> Vec<Estimator> {
    match spec {
        SchemeSpec::None => vec![Estimator::Pfm],
        _ => vec![Estimator::Pfm, Estimator::Lmmse],
    }
}

fn run_trial(
    exp: &Experiment,
    series: &Series,
    est: Estimator,
    nv: f64,
    beta: Option<f64>,
    seed: u64,
) -> Result<(Metrics, f64), HarnessError> {
    let data = exp.draw(series, nv, seed)?;
    let e = match est {
        Estimator::Pfm => exp.run_pfm(series, &data, nv, beta, seed, false)?,
        Estimator::Lmmse => exp.run_lmmse(series, &data, nv)?,
    };
    Ok((e.metrics, e.runtime_ms))
}

/// Picks the `β` with the lowest total `NMSE_H + NMSE_X` on dedicated tuning trials.
/// Trials whose draw fails are skipped; a decode failure scores the `β` as infinite.
pub fn tune_beta(exp: &Experiment, series: &Series, nv: f64) -> Option<f64> {
    let grid = &exp.cfg.pfm.beta_grid;
    if grid.is_empty() {
        return None;
    }
    let n = exp.cfg.pfm.tune_trials;
    let data = par::map_indexed(n, |k| {
        let seed = tuning_seed(exp.cfg.seed, k);
        exp.draw(series, nv, seed).ok().map(|d| (seed, d))
    });
    let data: Vec<_> = data.into_iter().flatten().collect();
    let scores = par::map_indexed(grid.len() * data.len(), |i| {
        let (b, (seed, d)) = (grid[i / data.len()], &data[i % data.len()]);
        exp.run_pfm(series, d, nv, Some(b), *seed, false)
            .map(|e| e.metrics.h.ratio() + e.metrics.x.ratio())
            .unwrap_or(f64::INFINITY)
    });
    let mut best = (grid[0], f64::INFINITY);
    for (j, &b) in grid.iter().enumerate() {
        let s: f64 = scores[j * data.len()..(j + 1) * data.len()].iter().sum();
        if s < best.1 {
            best = (b, s);
        }
    }
    Some(best.0)
}

/// Runs every `(scheme, cbr, csnr)` grid point with `n_trials` trials per estimator.
pub fn run_sweep(cfg: &ExperimentConfig, opts: SweepOptions) -> Result<SweepOutput, HarnessError> {
    let exp = Experiment::new(cfg)?;
    par::with_workers(cfg.workers, || run_sweep_inner(&exp, opts))
}

fn run_sweep_inner(exp: &Experiment, opts: SweepOptions) -> Result<SweepOutput, HarnessError> {
    let cfg = &exp.cfg;
    let mut out = SweepOutput {
        trials: vec![],
        rows: vec![],
        failed_trials: 0,
        violations: vec![],
    };
    for spec in cfg.schemes() {
        for &cbr in &cfg.sweep.cbr {
            let series = exp.series(spec, cbr)?;
            let bounds = if opts.with_bcrb {
                Some(series_bounds(exp, &series, &cfg.sweep.csnr_db)?)
            } else {
                None
            };
            for (ci, &csnr) in cfg.sweep.csnr_db.iter().enumerate() {
                let nv = exp.noise_var(csnr);
                let beta = tune_beta(exp, &series, nv);
                for est in estimators(&spec) {
                    let b = if est == Estimator::Pfm { beta } else { None };
                    let results = par::map_indexed(cfg.n_trials, |k| {
                        let seed = trial_seed(cfg.seed, k);
                        (seed, run_trial(exp, &series, est, nv, b, seed))
                    });
                    let beta_used = b.unwrap_or(if est == Estimator::Pfm {
                        cfg.pfm.beta_h
                    } else {
                        0.0
                    });
                    let mut hs = Vec::new();
                    let mut xs = Vec::new();
                    let mut ss = Vec::new();
                    let mut failed = 0;
                    for (k, (seed, r)) in results.into_iter().enumerate() {
                        let mut rec = TrialRecord {
                            estimator: est.label(),
                            scheme: spec.label(),
                            param: spec.param(),
                            cbr,
                            csnr_db: csnr,
                            trial: k,
                            seed,
                            beta: beta_used,
                            status: "ok".into(),
                            nmse_h_db: None,
                            nmse_x_db: None,
                            nmse_s_db: None,
                            runtime_ms: 0.0,
                            metrics: None,
                        };
                        match r {
                            Ok((m, ms)) => {
                                rec.nmse_h_db = Some(m.nmse_h_db());
                                rec.nmse_x_db = Some(m.nmse_x_db());
                                rec.nmse_s_db = Some(m.nmse_s_db());
                                rec.runtime_ms = ms;
                                rec.metrics = Some(m);
                                hs.push(m.h);
                                xs.push(m.x);
                                ss.push(m.s);
                            }
                            Err(e) => {
                                failed += 1;
                                rec.status = e.to_string();
                            }
                        }
                        out.trials.push(rec);
                    }
                    out.failed_trials += failed;
                    if failed as f64 > MAX_FAILURE_RATE * cfg.n_trials as f64 {
                        return Err(HarnessError::TooManyFailures {
                            failed,
                            total: cfg.n_trials,
                            point: format!(
                                "{} {} cbr={cbr} csnr={csnr}",
                                est.label(),
                                spec.label()
                            ),
                        });
                    }
                    let (Some(h), Some(x), Some(s)) = (
                        NmseSummary::from_trials(&hs),
                        NmseSummary::from_trials(&xs),
                        NmseSummary::from_trials(&ss),
                    ) else {
                        continue;
                    };
                    let bound = bounds.as_ref().map(|b| &b[ci].result);
                    let row = AggregateRow {
                        estimator: est.label(),
                        scheme: spec.label(),
                        param: spec.param(),
                        cbr,
                        csnr_db: csnr,
                        beta: beta_used,
                        n_ok: hs.len(),
                        n_failed: failed,
                        nmse_h_db: h.mean_db(),
                        nmse_h_se_db: h.se_db(),
                        nmse_h_pooled_db: h.pooled_db(),
                        nmse_x_db: x.mean_db(),
                        nmse_x_se_db: x.se_db(),
                        nmse_x_pooled_db: x.pooled_db(),
                        nmse_s_db: s.mean_db(),
                        nmse_s_se_db: s.se_db(),
                        nmse_s_pooled_db: s.pooled_db(),
                        bcrb_h_db: bound.map(|b| b.bcrb_h_db()),
                        bcrb_x_db: bound.and_then(|b| b.bcrb_x_db()),
                        h,
                        x,
                        s,
                        bcrb_h: bound.map(|b| b.bcrb_h),
                        bcrb_x: bound.and_then(|b| b.bcrb_x),
                    };
                    if let Some((ok_h, ok_x)) = row.bound_holds() {
                        for (ok, metric, nmse, bcrb) in [
                            (ok_h, "nmse_h", row.nmse_h_db, row.bcrb_h_db),
                            (ok_x, "nmse_x", row.nmse_x_db, row.bcrb_x_db),
                        ] {
                            if !ok {
                                out.violations.push(BoundViolation {
                                    estimator: row.estimator,
                                    scheme: row.scheme,
                                    cbr,
                                    csnr_db: csnr,
                                    metric,
                                    nmse_db: nmse,
                                    bcrb_db: bcrb.unwrap_or(f64::NAN),
                                });
                            }
                        }
                    }
                    out.rows.push(row);
                }
            }
        }
    }
    Ok(out)
}
