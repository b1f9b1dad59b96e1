//! Subcommand definitions and handlers.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use mtd_core::{
    deconv_estimate, estimate_aa, estimate_em, io, known_support_estimate, measurement_moments, oracle_distances,
    rmse, AaConfig, EmConfig, EstimateReport, Mode, Signal,
};

use crate::bench::{mean_runtimes, read_timings, rebuild_summaries, run_bench, BenchOptions, OutPaths};
use crate::config::BenchConfig;
use crate::{CliError, InstanceSpec, WORKERS_ENV};

#[derive(Debug, Parser)]
#[command(name = "mtd", version, about = "Multi-target detection: estimate a short signal from a long noisy measurement")]
pub struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true, env = WORKERS_ENV)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic measurement with ground-truth sidecar files.
    Generate(GenerateArgs),
    /// Compute measurement autocorrelations.
    Stats(StatsArgs),
    /// Estimate the signal by autocorrelation fitting or EM.
    Estimate(EstimateArgs),
    /// Run an oracle baseline.
    Baseline(BaselineArgs),
    /// Run or resume a benchmark sweep.
    Bench(BenchArgs),
    /// Rebuild and print the summaries of a sweep directory.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Ws,
    Asd,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::Ws => Mode::Ws,
            ModeArg::Asd => Mode::Asd,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimateMethod {
    Aa,
    Em,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaselineMethod {
    Deconv,
    #[value(name = "known-s")]
    KnownS,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 10)]
    pub length: usize,
    #[arg(long, default_value_t = 1_000_000)]
    pub num_samples: usize,
    #[arg(long)]
    pub density: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Measurement file; ground truth goes to `<out>.signal.txt` and `<out>.support.txt`.
    #[arg(long)]
    pub out: PathBuf,
    /// Gap law (`gap mass` lines) for sequential placement.
    #[arg(long)]
    pub psf_file: Option<PathBuf>,
    /// Signal file; the bundled signal is used otherwise.
    #[arg(long)]
    pub signal_file: Option<PathBuf>,
    /// Separation beyond L; defaults to L-1 (ws) or 0 (asd).
    #[arg(long)]
    pub w: Option<usize>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Measurement file.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: EstimateMethod,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Precomputed statistics for `--method aa`.
    #[arg(long)]
    pub stats: Option<PathBuf>,
    /// True signal; adds `rmse` to the report.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Per-iteration log-likelihood CSV (EM only).
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Estimated signal as text.
    #[arg(long)]
    pub signal_out: Option<PathBuf>,
    /// Skip the coarse-to-fine stages.
    #[arg(long)]
    pub no_marching: bool,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: BaselineMethod,
    /// True signal (oracle distances and RMSE).
    #[arg(long)]
    pub signal: PathBuf,
    /// True support.
    #[arg(long)]
    pub support: PathBuf,
    /// Exclusion radius for deconv; defaults to L+W of `--mode`.
    #[arg(long)]
    pub min_gap: Option<usize>,
    #[arg(long, value_enum, default_value = "ws")]
    pub mode: ModeArg,
    /// Estimated signal as text.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory; an existing sweep there is resumed.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides a configuration key, e.g. `--set trials=2`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long)]
    pub max_cells: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Sweep directory written by `bench`.
    #[arg(long)]
    pub dir: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    crate::init_workers(cli.workers)?;
    match cli.command {
        Command::Generate(a) => cmd_generate(&a),
        Command::Stats(a) => cmd_stats(&a),
        Command::Estimate(a) => cmd_estimate(&a),
        Command::Baseline(a) => cmd_baseline(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::Report(a) => cmd_report(&a),
    }
}

fn sidecar(out: &Path, suffix: &str) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn signal_sidecar(out: &Path) -> PathBuf {
    sidecar(out, ".signal.txt")
}

pub fn support_sidecar(out: &Path) -> PathBuf {
    sidecar(out, ".support.txt")
}

pub fn cmd_generate(a: &GenerateArgs) -> Result<(), CliError> {
    let signal = match &a.signal_file {
        Some(p) => io::read_signal(p)?,
        None if a.length == 10 => Signal::bundled(),
        None => return Err(CliError::Usage("--signal-file is required unless --length is 10".into())),
    };
    if signal.len() != a.length {
        return Err(CliError::Usage(format!(
            "signal file has length {} but --length is {}",
            signal.len(),
            a.length
        )));
    }
    if !(a.density > 0.0 && a.density < 1.0) {
        return Err(CliError::Usage("--density must lie in (0, 1)".into()));
    }
    let psf = match &a.psf_file {
        Some(p) => Some(io::read_psf(p, a.length)?),
        None => None,
    };
    let spec = InstanceSpec {
        num_samples: a.num_samples,
        density: a.density,
        sigma: a.sigma,
        mode: a.mode.into(),
        w: a.w,
        psf,
        signal,
    };
    let y = spec.generate(a.seed)?;
    let truth = y.truth().expect("synthetic data");
    io::write_measurement(&a.out, &y)?;
    io::write_signal(&signal_sidecar(&a.out), &truth.signal)?;
    io::write_support(&support_sidecar(&a.out), &truth.support)?;
    println!(
        "wrote {} (N = {}, M = {}, min gap {})",
        a.out.display(),
        y.len(),
        truth.support.count(),
        truth.support.min_gap().map_or("-".into(), |g| g.to_string())
    );
    Ok(())
}

pub fn cmd_stats(a: &StatsArgs) -> Result<(), CliError> {
    let y = io::read_measurement(&a.input)?;
    let s = measurement_moments(&y)?;
    io::write_stats(&a.out, &s)?;
    Ok(())
}

/// Report JSON, with the RMSE against `truth` when given.
pub fn report_json(r: &EstimateReport, rmse: Option<f64>) -> String {
    let mut v: serde_json::Value = serde_json::from_str(&r.to_json()).expect("report JSON");
    if let (Some(e), Some(obj)) = (rmse, v.as_object_mut()) {
        obj.insert("rmse".into(), serde_json::json!(e));
    }
    serde_json::to_string_pretty(&v).expect("report JSON") + "\n"
}

pub fn cmd_estimate(a: &EstimateArgs) -> Result<(), CliError> {
    if a.restarts == 0 {
        return Err(CliError::Usage("--restarts must be at least 1".into()));
    }
    let mode: Mode = a.mode.into();
    let report = match a.method {
        EstimateMethod::Aa => {
            let stats = match &a.stats {
                Some(p) => io::read_stats(p)?,
                None => measurement_moments(&io::read_measurement(&a.input)?)?,
            };
            let cfg = AaConfig {
                restarts: a.restarts,
                marching: !a.no_marching,
                ..AaConfig::default()
            };
            estimate_aa(&stats, mode, &cfg, a.seed)?
        }
        EstimateMethod::Em => {
            let y = io::read_measurement(&a.input)?;
            let cfg = EmConfig {
                restarts: a.restarts,
                marching: !a.no_marching,
                ..EmConfig::default()
            };
            estimate_em(&y, mode, &cfg, a.seed)?
        }
    };
    let err = match &a.truth {
        Some(p) => Some(rmse(&report.x_hat, &io::read_signal(p)?)?),
        None => None,
    };
    let json = report_json(&report, err);
    io::write_file(&a.out, |w| w.write_all(json.as_bytes()))?;
    if let Some(p) = &a.trace {
        io::write_trace(p, &report.trace)?;
    }
    if let Some(p) = &a.signal_out {
        io::write_signal(p, &report.x_hat)?;
    }
    match err {
        Some(e) => println!("restart {} selected, rmse {e:.6}", report.restart),
        None => println!("restart {} selected", report.restart),
    }
    Ok(())
}

pub fn cmd_baseline(a: &BaselineArgs) -> Result<(), CliError> {
    let y = io::read_measurement(&a.input)?;
    let x = io::read_signal(&a.signal)?;
    let support = io::read_support(&a.support, y.len(), y.signal_len())?;
    let est = match a.method {
        BaselineMethod::KnownS => known_support_estimate(&y, &support)?,
        BaselineMethod::Deconv => {
            let l = y.signal_len();
            let min_gap = a.min_gap.unwrap_or(match Mode::from(a.mode) {
                Mode::Ws => 2 * l - 1,
                Mode::Asd => l,
            });
            let z = oracle_distances(&y, &x)?;
            deconv_estimate(&y, &z, support.count(), min_gap)?
        }
    };
    io::write_signal(&a.out, &est)?;
    println!("rmse {:.6}", rmse(&est, &x)?);
    Ok(())
}

pub fn cmd_bench(a: &BenchArgs) -> Result<(), CliError> {
    let mut cfg = match &a.config {
        Some(p) => BenchConfig::from_file(p)?,
        None => BenchConfig::default(),
    };
    for o in &a.overrides {
        let (k, v) = o
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got '{o}'")))?;
        cfg.set(k.trim(), v.trim()).map_err(CliError::Usage)?;
    }
    cfg.validate().map_err(CliError::Usage)?;
    let report = run_bench(
        &cfg,
        &a.out,
        &BenchOptions {
            max_cells: a.max_cells,
        },
    )?;
    println!(
        "{} of {} rows in {}{}",
        report.raw.len(),
        cfg.methods.len() * cfg.sigma_grid.len() * cfg.trials,
        a.out.display(),
        if report.complete { "" } else { " (incomplete; rerun to resume)" }
    );
    Ok(())
}

pub fn cmd_report(a: &ReportArgs) -> Result<(), CliError> {
    let (_, agg, slopes) = rebuild_summaries(&a.dir)?;
    let runtimes = mean_runtimes(&read_timings(&OutPaths::new(&a.dir).timings)?);
    println!("{:<14} {:>10} {:>6} {:>12} {:>10}", "method", "sigma", "ok", "mean_rmse", "runtime_s");
    for r in &agg {
        println!(
            "{:<14} {:>10.4} {:>6} {:>12} {:>10}",
            r.method.as_str(),
            r.sigma,
            r.trials_ok,
            r.mean_rmse.map_or("-".into(), |v| format!("{v:.4e}")),
            runtimes
                .get(&(r.method, r.sigma_index))
                .map_or("-".into(), |v| format!("{v:.3}"))
        );
    }
    for s in &slopes {
        println!(
            "slope {:<14} sigma {:.4}..{:.4} over {} points: {}",
            s.method.as_str(),
            s.sigma_lo,
            s.sigma_hi,
            s.points,
            s.slope.map_or("-".into(), |v| format!("{v:.3}"))
        );
    }
    Ok(())
}
