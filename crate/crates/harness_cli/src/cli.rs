use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use channel_sim::io::save_channel_ensemble;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use flow_priors::{cfm_train, score_error, MlpVf, TrainConfig};
use serde::Serialize;
use serde_json::json;
use tensor_core::blob::{complex_payload, write_blob};
use tensor_core::par;
use tensor_core::rng::split_seed;

use crate::bound::series_bounds;
use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::experiment::{trial_seed, Experiment, Series};
use crate::metrics::channel_bandwidth_ratio;
use crate::output::{
    write_csv, write_csv_with_header, write_json, write_sweep, Manifest, OutDir, RESULTS_FILE,
};
use crate::rank::rank_check;
use crate::sweep::{run_sweep, SweepOptions};

/// `n_f,n_t,T,n_r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimsArg(pub [usize; 4]);

/// `start:step:stop`, inclusive of `stop`.
#[derive(Debug, Clone, PartialEq)]
pub struct CsnrRange(pub Vec<f64>);

fn parse_dims(s: &str) -> Result<DimsArg, String> {
    let v: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let d: [usize; 4] = v
        .try_into()
        .map_err(|_| "expected four values n_f,n_t,T,n_r".to_string())?;
    if d.contains(&0) {
        return Err("dimensions must be positive".into());
    }
    Ok(DimsArg(d))
}

pub fn parse_csnr(s: &str) -> Result<CsnrRange, String> {
    let v: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    let [start, step, stop]: [f64; 3] = v
        .try_into()
        .map_err(|_| "expected start:step:stop".to_string())?;
    if !(start.is_finite() && step.is_finite() && stop.is_finite()) {
        return Err("values must be finite".into());
    }
    if start == stop {
        return Ok(CsnrRange(vec![start]));
    }
    if !(step > 0.0) || stop < start {
        return Err("need step > 0 and stop >= start".into());
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok(CsnrRange(
        (0..=n).map(|i| start + i as f64 * step).collect(),
    ))
}

#[derive(Debug, Parser)]
#[command(
    name = "pfm-harness",
    version,
    about = "Joint channel and source estimation experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML experiment configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub trials: Option<usize>,
    /// `n_f,n_t,T,n_r`.
    #[arg(long, global = true, value_parser = parse_dims)]
    pub dims: Option<DimsArg>,
    /// CSNR grid in dB as `start:step:stop`.
    #[arg(long, global = true, allow_hyphen_values = true, value_parser = parse_csnr)]
    pub csnr: Option<CsnrRange>,
    /// Evaluate the joint bound at every sweep point.
    #[arg(long, global = true)]
    pub with_bcrb: bool,
    /// Write channels, blocks, observations and encoders as binary tensor files.
    #[arg(long, global = true)]
    pub dump_tensors: bool,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// One trial of the first series with a per-step trace.
    Simulate,
    /// Full grid of pilot schemes, channel-use ratios and CSNRs.
    Sweep,
    /// Bound curves over the CSNR grid.
    Bcrb,
    /// Rank and null-space check of the FIM on random instances.
    RankCheck,
    /// Flow-matching training of a source prior network.
    TrainPrior,
    /// Long-format plot table from a sweep result file.
    EmitPlots {
        /// Sweep results; defaults to `<out>/results.csv`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::Simulate => "simulate",
            Self::Sweep => "sweep",
            Self::Bcrb => "bcrb",
            Self::RankCheck => "rank-check",
            Self::TrainPrior => "train-prior",
            Self::EmitPlots { .. } => "emit-plots",
        }
    }
}

/// Parses arguments, runs the subcommand and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Configuration after applying command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load_unvalidated(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output = o.clone();
    }
    if let Some(t) = cli.trials {
        cfg.n_trials = t;
    }
    if let Some(DimsArg([n_f, n_t, t_s, n_r])) = cli.dims {
        cfg.dims.n_f = n_f;
        cfg.dims.n_t = n_t;
        cfg.dims.t_s = t_s;
        cfg.dims.n_r = n_r;
    }
    if let Some(c) = &cli.csnr {
        cfg.sweep.csnr_db = c.0.clone();
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<(), HarnessError> {
    let cfg = resolve_config(cli)?;
    match &cli.command {
        Command::RankCheck => cfg
            .dims
            .system()
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))?,
        Command::EmitPlots { .. } => {}
        _ => cfg.validate()?,
    }
    let start = Instant::now();
    let mut out = OutDir::create(&cfg.output)?;
    let mut manifest = Manifest::new(cli.command.name(), &cfg);
    par::with_workers(cfg.workers, || -> Result<(), HarnessError> {
        match &cli.command {
            Command::Simulate => simulate(&cfg, cli.dump_tensors, &mut out, &mut manifest),
            Command::Sweep => sweep(&cfg, cli.with_bcrb, &mut out, &mut manifest),
            Command::Bcrb => bcrb_curves(&cfg, &mut out, &mut manifest),
            Command::RankCheck => rank(&cfg, &mut out, &mut manifest),
            Command::TrainPrior => train_prior(&cfg, &mut out, &mut manifest),
            Command::EmitPlots { input } => emit_plots(&cfg, input.as_deref(), &mut out),
        }
    })?;
    manifest.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    out.finish(manifest)?;
    Ok(())
}

fn first_series(exp: &Experiment) -> Result<Series, HarnessError> {
    exp.series(exp.cfg.schemes()[0], exp.cfg.sweep.cbr[0])
}

#[derive(Serialize)]
struct SimulateSummary {
    scheme: &'static str,
    param: f64,
    cbr: f64,
    csnr_db: f64,
    noise_var: f64,
    seed: u64,
    pfm_nmse_h_db: f64,
    pfm_nmse_x_db: f64,
    pfm_nmse_s_db: f64,
    pfm_nfe: usize,
    lmmse_nmse_h_db: Option<f64>,
    lmmse_nmse_x_db: Option<f64>,
    lmmse_nmse_s_db: Option<f64>,
}

fn simulate(
    cfg: &ExperimentConfig,
    dump: bool,
    out: &mut OutDir,
    manifest: &mut Manifest,
) -> Result<(), HarnessError> {
    let exp = Experiment::new(cfg)?;
    let series = first_series(&exp)?;
    let csnr = cfg.sweep.csnr_db[0];
    let nv = exp.noise_var(csnr);
    let seed = trial_seed(cfg.seed, 0);
    let data = exp.draw(&series, nv, seed)?;
    let pfm = exp.run_pfm(&series, &data, nv, None, seed, true)?;
    let lmmse = match series.spec {
        crate::config::SchemeSpec::None => None,
        _ => Some(exp.run_lmmse(&series, &data, nv)?),
    };
    pfm_decoder::write_trace_csv(&pfm.trace, std::fs::File::create(out.file("trace.csv"))?)?;
    let summary = SimulateSummary {
        scheme: series.spec.label(),
        param: series.spec.param(),
        cbr: series.cbr,
        csnr_db: csnr,
        noise_var: nv,
        seed,
        pfm_nmse_h_db: pfm.metrics.nmse_h_db(),
        pfm_nmse_x_db: pfm.metrics.nmse_x_db(),
        pfm_nmse_s_db: pfm.metrics.nmse_s_db(),
        pfm_nfe: pfm.trace.len() * cfg.pfm.n_avg,
        lmmse_nmse_h_db: lmmse.as_ref().map(|e| e.metrics.nmse_h_db()),
        lmmse_nmse_x_db: lmmse.as_ref().map(|e| e.metrics.nmse_x_db()),
        lmmse_nmse_s_db: lmmse.as_ref().map(|e| e.metrics.nmse_s_db()),
    };
    write_json(&out.file("simulate.json"), &summary)?;
    if dump {
        std::fs::create_dir_all(out.root.join("tensors"))?;
        let tag = format!("{}_{}", series.spec.label(), series.spec.param());
        save_channel_ensemble(
            &out.file("tensors/channel_true.ctb"),
            std::slice::from_ref(&data.h),
            "kron_exponential",
            seed,
        )?;
        save_channel_ensemble(
            &out.file("tensors/channel_pfm.ctb"),
            std::slice::from_ref(&pfm.h),
            "pfm_estimate",
            seed,
        )?;
        let block = |name: &str, t: &tensor_core::CTensor3| {
            let (a, b, c) = t.dims();
            let header = json!({ "format": "ctensor3", "name": name, "dims": [a, b, c], "scheme": tag, "seed": seed });
            (header, complex_payload(t.data()))
        };
        for (name, t) in [("x_true", &data.x.x), ("x_pfm", &pfm.x), ("y", &data.y)] {
            let (header, payload) = block(name, t);
            write_blob(&out.file(&format!("tensors/{name}.ctb")), &header, &payload)?;
        }
        for (k, enc) in series.encoders.iter().enumerate() {
            enc.save(&out.file(&format!("tensors/encoder_{k}.ctb")))?;
        }
    }
    manifest.extra = serde_json::to_value(&summary)?;
    println!(
        "pfm nmse_h {:.2} dB, nmse_x {:.2} dB, nfe {}",
        summary.pfm_nmse_h_db, summary.pfm_nmse_x_db, summary.pfm_nfe
    );
    Ok(())
}

fn sweep(
    cfg: &ExperimentConfig,
    with_bcrb: bool,
    out: &mut OutDir,
    manifest: &mut Manifest,
) -> Result<(), HarnessError> {
    let result = run_sweep(cfg, SweepOptions { with_bcrb })?;
    write_sweep(out, &result)?;
    manifest.failed_trials = result.failed_trials;
    manifest.bound_violations = result.violations.clone();
    for v in &result.violations {
        eprintln!(
            "bound violation: {} {} cbr={} csnr={} {} {:.2} dB < bcrb {:.2} dB",
            v.estimator, v.scheme, v.cbr, v.csnr_db, v.metric, v.nmse_db, v.bcrb_db
        );
    }
    println!(
        "{} rows, {} failed trials",
        result.rows.len(),
        result.failed_trials
    );
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct BcrbRow {
    pub csnr_db: f64,
    pub bcrb_h_db: f64,
    pub bcrb_x_db: Option<f64>,
    pub bfim_min_eig: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Serialize)]
struct BcrbSeriesRow {
    scheme: &'static str,
    param: f64,
    cbr: f64,
    csnr_db: f64,
    bcrb_h_db: f64,
    bcrb_x_db: Option<f64>,
    bfim_min_eig: f64,
    n_samples: usize,
}

pub const BCRB_FILE: &str = "bcrb.csv";

fn bcrb_curves(
    cfg: &ExperimentConfig,
    out: &mut OutDir,
    manifest: &mut Manifest,
) -> Result<(), HarnessError> {
    let exp = Experiment::new(cfg)?;
    let mut all = Vec::new();
    let mut first = None;
    for spec in cfg.schemes() {
        for &cbr in &cfg.sweep.cbr {
            let series = exp.series(spec, cbr)?;
            let rows: Vec<BcrbRow> = series_bounds(&exp, &series, &cfg.sweep.csnr_db)?
                .into_iter()
                .map(|p| BcrbRow {
                    csnr_db: p.csnr_db,
                    bcrb_h_db: p.result.bcrb_h_db(),
                    bcrb_x_db: p.result.bcrb_x_db(),
                    bfim_min_eig: p.result.min_eig,
                    n_samples: p.n_samples,
                })
                .collect();
            all.extend(rows.iter().map(|r| BcrbSeriesRow {
                scheme: spec.label(),
                param: spec.param(),
                cbr,
                csnr_db: r.csnr_db,
                bcrb_h_db: r.bcrb_h_db,
                bcrb_x_db: r.bcrb_x_db,
                bfim_min_eig: r.bfim_min_eig,
                n_samples: r.n_samples,
            }));
            first.get_or_insert(rows);
        }
    }
    let first = first.unwrap_or_default();
    write_csv(&out.file(BCRB_FILE), &first)?;
    write_csv(&out.file("bcrb_all.csv"), &all)?;
    manifest.extra = json!({ "bcrb_csv_series": { "scheme": cfg.schemes()[0].label(), "cbr": cfg.sweep.cbr[0] } });
    for r in &first {
        println!("csnr {:>6.2} dB  bcrb_h {:>8.3} dB", r.csnr_db, r.bcrb_h_db);
    }
    Ok(())
}

fn rank(
    cfg: &ExperimentConfig,
    out: &mut OutDir,
    manifest: &mut Manifest,
) -> Result<(), HarnessError> {
    let d = &cfg.dims;
    let dims = [d.n_f, d.n_t, d.t_s, d.n_r];
    let summary = rank_check(dims, cfg.n_trials, cfg.seed, 1.0)?;
    write_csv(&out.file("rank_check.csv"), &summary.rows)?;
    let line = summary.line();
    manifest.extra = json!({ "dims": dims, "summary": line });
    println!("{line}");
    if summary.passed() != summary.rows.len() {
        return Err(HarnessError::Numerical(format!(
            "rank check failed: {line}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct CheckpointRow {
    checkpoint: usize,
    steps: usize,
    final_loss: f64,
    delta: f64,
}

fn train_prior(
    cfg: &ExperimentConfig,
    out: &mut OutDir,
    manifest: &mut Manifest,
) -> Result<(), HarnessError> {
    let exp = Experiment::new(cfg)?;
    let series = first_series(&exp)?;
    let t = &cfg.train;
    let m = series.source_dim;
    let mut rng = tensor_core::rng::stream_rng(split_seed(cfg.seed, 0x5452_4149), 0);
    let data: Vec<Vec<f64>> = (0..t.n_data)
        .map(|_| series.source_prior.sample(&mut rng))
        .collect();
    let mut widths = vec![m];
    widths.extend(&t.hidden);
    widths.push(m);
    let mut net = MlpVf::new(&widths, t.activation, cfg.seed)?;
    let per = (t.steps / 3).max(1);
    let eps = cfg.bound.eps.max(0.05);
    let mut rows = Vec::new();
    for c in 0..3 {
        let lr = t.lr / (1u32 << c) as f64;
        let (trained, report) = cfm_train(
            &data,
            &net,
            &TrainConfig {
                steps: per,
                lr,
                batch: t.batch,
                seed: split_seed(cfg.seed, c as u64),
            },
        )?;
        net = trained;
        let delta = score_error(
            &net,
            &series.source_prior,
            eps,
            500,
            split_seed(cfg.seed, 0x4445_4c54),
        )?;
        rows.push(CheckpointRow {
            checkpoint: c + 1,
            steps: per * (c + 1),
            final_loss: report.final_loss,
            delta,
        });
        println!(
            "checkpoint {} loss {:.5} delta {:.5}",
            c + 1,
            report.final_loss,
            delta
        );
    }
    net.save(&out.file("source_prior.ctb"))?;
    write_csv(&out.file("train_report.csv"), &rows)?;
    manifest.extra = json!({
        "source_dim": m,
        "cbr": channel_bandwidth_ratio(cfg.dims.n_f, cfg.dims.t_s, m),
        "widths": widths,
        "delta_eps": eps,
    });
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
struct PlotRow {
    estimator: String,
    scheme: String,
    param: String,
    cbr: String,
    csnr_db: String,
    metric: &'static str,
    value: String,
    se: String,
}

pub const PLOT_FILE: &str = "plot_long.csv";

fn emit_plots(
    cfg: &ExperimentConfig,
    input: Option<&Path>,
    out: &mut OutDir,
) -> Result<(), HarnessError> {
    let path = input.map_or_else(|| cfg.output.join(RESULTS_FILE), Path::to_path_buf);
    let mut reader = csv::Reader::from_path(&path)
        .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::Config(format!("{} lacks column {name}", path.display())))
    };
    let (est, scheme, param, cbr, csnr) = (
        col("estimator")?,
        col("scheme")?,
        col("param")?,
        col("cbr")?,
        col("csnr_db")?,
    );
    let metrics = [
        ("nmse_h", "nmse_h_db", Some("nmse_h_se_db")),
        ("nmse_x", "nmse_x_db", Some("nmse_x_se_db")),
        ("nmse_s", "nmse_s_db", Some("nmse_s_se_db")),
        ("nmse_h_pooled", "nmse_h_pooled_db", None),
        ("nmse_x_pooled", "nmse_x_pooled_db", None),
        ("nmse_s_pooled", "nmse_s_pooled_db", None),
        ("bcrb_h", "bcrb_h_db", None),
        ("bcrb_x", "bcrb_x_db", None),
    ];
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        for (metric, vcol, scol) in metrics {
            let Some(vi) = headers.iter().position(|h| h == vcol) else {
                continue;
            };
            let value = rec.get(vi).unwrap_or("").to_string();
            if value.is_empty() {
                continue;
            }
            let se = scol
                .and_then(|c| headers.iter().position(|h| h == c))
                .and_then(|i| rec.get(i))
                .unwrap_or("")
                .to_string();
            rows.push(PlotRow {
                estimator: rec[est].to_string(),
                scheme: rec[scheme].to_string(),
                param: rec[param].to_string(),
                cbr: rec[cbr].to_string(),
                csnr_db: rec[csnr].to_string(),
                metric,
                value,
                se,
            });
        }
    }
    write_csv_with_header(
        &out.file(PLOT_FILE),
        &[
            "estimator",
            "scheme",
            "param",
            "cbr",
            "csnr_db",
            "metric",
            "value",
            "se",
        ],
        &rows,
    )?;
    println!("{} plot rows", rows.len());
    Ok(())
}
