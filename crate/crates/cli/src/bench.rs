//! Resumable σ × trial benchmark sweeps.
//!
//! Output directory layout:
//!
//! - `config.txt`: the sweep configuration; resuming into a directory holding
//!   a different configuration is refused.
//! - `raw.csv`: `method,sigma_index,sigma,trial,status,rmse,rho0_error,rho1_rmse,objective`,
//!   one row per method × σ × trial.
//! - `aggregate.csv`: `method,sigma_index,sigma,trials_ok,mean_rmse,mean_rho0_error,mean_rho1_rmse`,
//!   means over the rows with status `ok`.
//! - `slopes.csv`: `method,sigma_lo,sigma_hi,points,slope`, least-squares slope of
//!   log10 mean RMSE against log10 σ over each configured range.
//! - `timings.csv`: `method,sigma_index,trial,runtime_secs`. Wall times are kept
//!   apart so that every other file is byte-identical across runs.
//!
//! Per-trial data use the seed `derive_seed(seed, [label("data"), σ index, trial])`
//! and every method run uses `derive_seed(seed, [label(method), σ index, trial])`,
//! so a cell can be recomputed in isolation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use rayon::prelude::*;

use mtd_core::rng::{derive_seed, label};
use mtd_core::{
    deconv_estimate, estimate_aa, estimate_em, io, known_support_estimate, measurement_moments, oracle_distances,
    rmse, AaConfig, DensityParams, EmConfig, EstimateReport, Measurement, Mode, MomentStats, MtdError, Signal,
};

use crate::config::{BenchConfig, BenchMethod};
use crate::{CliError, InstanceSpec};

pub const RAW_HEADER: &str = "method,sigma_index,sigma,trial,status,rmse,rho0_error,rho1_rmse,objective";
pub const AGGREGATE_HEADER: &str = "method,sigma_index,sigma,trials_ok,mean_rmse,mean_rho0_error,mean_rho1_rmse";
pub const SLOPES_HEADER: &str = "method,sigma_lo,sigma_hi,points,slope";
pub const TIMINGS_HEADER: &str = "method,sigma_index,trial,runtime_secs";

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub method: BenchMethod,
    pub sigma_index: usize,
    pub sigma: f64,
    pub trial: usize,
    /// `ok`, `data-error` or `numerical-failure`.
    pub status: String,
    pub rmse: Option<f64>,
    pub rho0_error: Option<f64>,
    pub rho1_rmse: Option<f64>,
    /// Final cost (AA) or log-likelihood (EM).
    pub objective: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub method: BenchMethod,
    pub sigma_index: usize,
    pub sigma: f64,
    pub trials_ok: usize,
    pub mean_rmse: Option<f64>,
    pub mean_rho0_error: Option<f64>,
    pub mean_rho1_rmse: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlopeRow {
    pub method: BenchMethod,
    pub sigma_lo: f64,
    pub sigma_hi: f64,
    pub points: usize,
    pub slope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub method: BenchMethod,
    pub sigma_index: usize,
    pub trial: usize,
    pub runtime_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub raw: Vec<RawRow>,
    pub aggregate: Vec<AggregateRow>,
    pub slopes: Vec<SlopeRow>,
    /// False when the sweep stopped early.
    pub complete: bool,
}

impl BenchReport {
    pub fn mean_rmse(&self, method: BenchMethod, sigma_index: usize) -> Option<f64> {
        self.aggregate
            .iter()
            .find(|a| a.method == method && a.sigma_index == sigma_index)
            .and_then(|a| a.mean_rmse)
    }

    pub fn slope(&self, method: BenchMethod, range: usize) -> Option<f64> {
        self.slopes.iter().filter(|s| s.method == method).nth(range).and_then(|s| s.slope)
    }
}

#[derive(Debug, Clone, Default)]
pub struct BenchOptions {
    /// Stop after this many new σ × trial cells; used to exercise resumption.
    pub max_cells: Option<usize>,
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:?}")).unwrap_or_default()
}

fn parse_opt(s: &str) -> Option<Option<f64>> {
    if s.is_empty() {
        Some(None)
    } else {
        s.parse().ok().map(Some)
    }
}

impl RawRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:?},{},{},{},{},{},{}",
            self.method,
            self.sigma_index,
            self.sigma,
            self.trial,
            self.status,
            fmt_opt(self.rmse),
            fmt_opt(self.rho0_error),
            fmt_opt(self.rho1_rmse),
            fmt_opt(self.objective)
        )
    }

    pub fn parse(line: &str) -> Option<RawRow> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return None;
        }
        Some(RawRow {
            method: f[0].parse().ok()?,
            sigma_index: f[1].parse().ok()?,
            sigma: f[2].parse().ok()?,
            trial: f[3].parse().ok()?,
            status: f[4].to_string(),
            rmse: parse_opt(f[5])?,
            rho0_error: parse_opt(f[6])?,
            rho1_rmse: parse_opt(f[7])?,
            objective: parse_opt(f[8])?,
        })
    }

    fn key(&self) -> (usize, usize, BenchMethod) {
        (self.sigma_index, self.trial, self.method)
    }
}

impl TimingRow {
    fn to_csv(&self) -> String {
        format!("{},{},{},{:?}", self.method, self.sigma_index, self.trial, self.runtime_secs)
    }

    pub fn parse(line: &str) -> Option<TimingRow> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 4 {
            return None;
        }
        Some(TimingRow {
            method: f[0].parse().ok()?,
            sigma_index: f[1].parse().ok()?,
            trial: f[2].parse().ok()?,
            runtime_secs: f[3].parse().ok()?,
        })
    }
}

impl BenchConfig {
    /// Renders the configuration in the key = value format it is read from.
    pub fn to_config_text(&self) -> String {
        let join = |v: &[String]| v.join(", ");
        let mut s = String::new();
        let sig: Vec<String> = self.sigma_grid.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "sigma = {}", join(&sig));
        let _ = writeln!(s, "trials = {}", self.trials);
        let _ = writeln!(s, "num_samples = {}", self.num_samples);
        let _ = writeln!(s, "length = {}", self.length);
        let _ = writeln!(s, "density = {:?}", self.density);
        let _ = writeln!(s, "mode = {}", self.mode);
        if let Some(w) = self.w {
            let _ = writeln!(s, "w = {w}");
        }
        if let Some(p) = &self.psf_file {
            let _ = writeln!(s, "psf_file = {}", p.display());
        }
        if let Some(p) = &self.signal_file {
            let _ = writeln!(s, "signal_file = {}", p.display());
        }
        let m: Vec<String> = self.methods.iter().map(|m| m.to_string()).collect();
        let _ = writeln!(s, "methods = {}", join(&m));
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "restarts = {}", self.restarts);
        let _ = writeln!(s, "em_max_iter = {}", self.em_max_iter);
        if !self.slope_ranges.is_empty() {
            let r: Vec<String> = self
                .slope_ranges
                .iter()
                .map(|(a, b)| format!("{:?}:{:?}", a.log10(), b.log10()))
                .collect();
            let _ = writeln!(s, "slope_ranges_log10 = {}", join(&r));
        }
        s
    }

    fn instance(&self, sigma: f64) -> Result<InstanceSpec, CliError> {
        let signal = match &self.signal_file {
            Some(p) => io::read_signal(p)?,
            None => Signal::bundled(),
        };
        if signal.len() != self.length {
            return Err(CliError::Usage(format!(
                "signal has length {} but length = {}",
                signal.len(),
                self.length
            )));
        }
        let psf = match &self.psf_file {
            Some(p) => Some(io::read_psf(p, self.length)?),
            None => None,
        };
        Ok(InstanceSpec {
            num_samples: self.num_samples,
            density: self.density,
            sigma,
            mode: self.mode,
            w: self.w,
            psf,
            signal,
        })
    }
}

fn read_lines<T>(path: &Path, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, CliError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    // A sweep killed mid-write can leave a truncated last line; anything unparsable is dropped.
    Ok(text.lines().skip(1).filter_map(parse).collect())
}

pub fn read_raw(path: &Path) -> Result<Vec<RawRow>, CliError> {
    read_lines(path, RawRow::parse)
}

pub fn read_timings(path: &Path) -> Result<Vec<TimingRow>, CliError> {
    read_lines(path, TimingRow::parse)
}

fn write_csv(path: &Path, header: &str, lines: impl Iterator<Item = String>) -> Result<(), CliError> {
    let mut text = String::from(header);
    text.push('\n');
    for l in lines {
        text.push_str(&l);
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

struct Appender {
    raw: File,
    timings: File,
}

fn open_append(path: &Path) -> Result<File, CliError> {
    OpenOptions::new()
        .append(true)
        .open(path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

/// Runs (or resumes) a sweep, writing its CSV files into `out`.
pub fn run_bench(cfg: &BenchConfig, out: &Path, opts: &BenchOptions) -> Result<BenchReport, CliError> {
    cfg.validate().map_err(CliError::Usage)?;
    fs::create_dir_all(out).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    let paths = OutPaths::new(out);

    let cfg_text = cfg.to_config_text();
    if paths.config.exists() {
        let existing = fs::read_to_string(&paths.config)
            .map_err(|e| CliError::Data(format!("{}: {e}", paths.config.display())))?;
        if existing != cfg_text {
            return Err(CliError::Usage(format!(
                "{} holds a different sweep configuration",
                paths.config.display()
            )));
        }
    }
    fs::write(&paths.config, &cfg_text).map_err(|e| CliError::Data(format!("{}: {e}", paths.config.display())))?;
    let instances: Vec<InstanceSpec> = cfg.sigma_grid.iter().map(|&s| cfg.instance(s)).collect::<Result<_, _>>()?;

    let mut done: BTreeMap<(usize, usize, BenchMethod), RawRow> = BTreeMap::new();
    for r in read_raw(&paths.raw)? {
        if r.sigma_index < cfg.sigma_grid.len() && r.trial < cfg.trials && cfg.methods.contains(&r.method) {
            done.insert(r.key(), r);
        }
    }
    let mut timings: BTreeMap<(usize, usize, BenchMethod), TimingRow> = read_timings(&paths.timings)?
        .into_iter()
        .map(|t| ((t.sigma_index, t.trial, t.method), t))
        .collect();
    write_csv(&paths.raw, RAW_HEADER, done.values().map(RawRow::to_csv))?;
    write_csv(&paths.timings, TIMINGS_HEADER, timings.values().map(TimingRow::to_csv))?;

    let mut pending: Vec<(usize, usize, Vec<BenchMethod>)> = Vec::new();
    for si in 0..cfg.sigma_grid.len() {
        for t in 0..cfg.trials {
            let missing: Vec<BenchMethod> = cfg
                .methods
                .iter()
                .copied()
                .filter(|m| !done.contains_key(&(si, t, *m)))
                .collect();
            if !missing.is_empty() {
                pending.push((si, t, missing));
            }
        }
    }
    let truncated = opts.max_cells.is_some_and(|k| k < pending.len());
    pending.truncate(opts.max_cells.unwrap_or(usize::MAX));

    let appender = Mutex::new(Appender {
        raw: open_append(&paths.raw)?,
        timings: open_append(&paths.timings)?,
    });
    let results: Vec<Vec<(RawRow, TimingRow)>> = pending
        .par_iter()
        .map(|(si, t, methods)| {
            let rows = run_cell(cfg, &instances[*si], *si, *t, methods);
            let mut a = appender.lock().expect("appender lock");
            for (r, tm) in &rows {
                // Rows are rewritten in canonical order at the end, so an append failure only costs resumability.
                let _ = writeln!(a.raw, "{}", r.to_csv());
                let _ = writeln!(a.timings, "{}", tm.to_csv());
            }
            let _ = a.raw.flush();
            let _ = a.timings.flush();
            rows
        })
        .collect();
    drop(appender);

    for (r, tm) in results.into_iter().flatten() {
        timings.insert(r.key(), tm);
        done.insert(r.key(), r);
    }
    let raw: Vec<RawRow> = canonical(cfg, &done);
    write_csv(&paths.raw, RAW_HEADER, raw.iter().map(RawRow::to_csv))?;
    write_csv(
        &paths.timings,
        TIMINGS_HEADER,
        canonical_keys(cfg).filter_map(|k| timings.get(&k)).map(TimingRow::to_csv),
    )?;
    let aggregate = aggregate(cfg, &raw);
    let slopes = slopes(cfg, &aggregate);
    write_csv(&paths.aggregate, AGGREGATE_HEADER, aggregate.iter().map(AggregateRow::to_csv))?;
    write_csv(&paths.slopes, SLOPES_HEADER, slopes.iter().map(SlopeRow::to_csv))?;
    Ok(BenchReport {
        complete: !truncated && raw.len() == cfg.methods.len() * cfg.sigma_grid.len() * cfg.trials,
        raw,
        aggregate,
        slopes,
    })
}

pub struct OutPaths {
    pub config: PathBuf,
    pub raw: PathBuf,
    pub aggregate: PathBuf,
    pub slopes: PathBuf,
    pub timings: PathBuf,
}

impl OutPaths {
    pub fn new(out: &Path) -> Self {
        OutPaths {
            config: out.join("config.txt"),
            raw: out.join("raw.csv"),
            aggregate: out.join("aggregate.csv"),
            slopes: out.join("slopes.csv"),
            timings: out.join("timings.csv"),
        }
    }
}

/// σ index, then trial, then method in configuration order.
fn canonical_keys(cfg: &BenchConfig) -> impl Iterator<Item = (usize, usize, BenchMethod)> + '_ {
    (0..cfg.sigma_grid.len())
        .flat_map(move |si| (0..cfg.trials).flat_map(move |t| cfg.methods.iter().map(move |&m| (si, t, m))))
}

fn canonical(cfg: &BenchConfig, rows: &BTreeMap<(usize, usize, BenchMethod), RawRow>) -> Vec<RawRow> {
    canonical_keys(cfg).filter_map(|k| rows.get(&k).cloned()).collect()
}

struct CellData {
    y: Measurement,
    rho0: f64,
    rho1: Vec<f64>,
    stats: Option<MomentStats>,
}

fn run_cell(
    cfg: &BenchConfig,
    spec: &InstanceSpec,
    si: usize,
    trial: usize,
    methods: &[BenchMethod],
) -> Vec<(RawRow, TimingRow)> {
    let data_seed = derive_seed(cfg.seed, &[label("data"), si as u64, trial as u64]);
    let data = spec.generate(data_seed).and_then(|y| {
        let truth = DensityParams::from_support(&y.truth().expect("synthetic data").support)?;
        Ok(CellData {
            y,
            rho0: truth.rho0,
            rho1: truth.rho1,
            stats: None,
        })
    });
    let mut data = match data {
        Ok(d) => d,
        Err(e) => {
            eprintln!("sigma index {si}, trial {trial}: data generation failed: {e}");
            return methods
                .iter()
                .map(|&m| (failed_row(m, si, spec.sigma, trial, &e), timing(m, si, trial, 0.0)))
                .collect();
        }
    };
    methods
        .iter()
        .map(|&m| {
            let start = Instant::now();
            let seed = derive_seed(cfg.seed, &[label(m.as_str()), si as u64, trial as u64]);
            let row = match run_method(cfg, spec, &mut data, m, seed) {
                Ok(r) => r.into_row(m, si, spec.sigma, trial),
                Err(e) => {
                    eprintln!("{m}, sigma index {si}, trial {trial}: {e}");
                    failed_row(m, si, spec.sigma, trial, &e)
                }
            };
            (row, timing(m, si, trial, start.elapsed().as_secs_f64()))
        })
        .collect()
}

fn timing(method: BenchMethod, sigma_index: usize, trial: usize, runtime_secs: f64) -> TimingRow {
    TimingRow {
        method,
        sigma_index,
        trial,
        runtime_secs,
    }
}

fn failed_row(method: BenchMethod, sigma_index: usize, sigma: f64, trial: usize, e: &MtdError) -> RawRow {
    RawRow {
        method,
        sigma_index,
        sigma,
        trial,
        status: if e.is_numerical() { "numerical-failure" } else { "data-error" }.into(),
        rmse: None,
        rho0_error: None,
        rho1_rmse: None,
        objective: None,
    }
}

struct MethodResult {
    rmse: f64,
    rho0_error: Option<f64>,
    rho1_rmse: Option<f64>,
    objective: Option<f64>,
}

impl MethodResult {
    fn into_row(self, method: BenchMethod, sigma_index: usize, sigma: f64, trial: usize) -> RawRow {
        RawRow {
            method,
            sigma_index,
            sigma,
            trial,
            status: "ok".into(),
            rmse: Some(self.rmse),
            rho0_error: self.rho0_error,
            rho1_rmse: self.rho1_rmse,
            objective: self.objective,
        }
    }
}

fn from_report(r: &EstimateReport, data: &CellData, truth: &Signal) -> Result<MethodResult, MtdError> {
    let rho1_rmse = (!r.rho1_hat.is_empty() && r.rho1_hat.len() == data.rho1.len()).then(|| {
        let ss: f64 = r.rho1_hat.iter().zip(&data.rho1).map(|(a, b)| (a - b).powi(2)).sum();
        (ss / data.rho1.len() as f64).sqrt()
    });
    Ok(MethodResult {
        rmse: rmse(&r.x_hat, truth)?,
        rho0_error: Some((r.rho0_hat - data.rho0).abs()),
        rho1_rmse,
        objective: r.final_cost.or(r.log_likelihood),
    })
}

fn run_method(
    cfg: &BenchConfig,
    spec: &InstanceSpec,
    data: &mut CellData,
    method: BenchMethod,
    seed: u64,
) -> Result<MethodResult, MtdError> {
    let truth = data.y.truth().expect("synthetic data").clone();
    let mode = match method {
        BenchMethod::AaWsOnAsd | BenchMethod::EmWsOnAsd => Mode::Ws,
        _ => cfg.mode,
    };
    match method {
        BenchMethod::Aa | BenchMethod::AaWsOnAsd => {
            if data.stats.is_none() {
                data.stats = Some(measurement_moments(&data.y)?);
            }
            let aa = AaConfig {
                restarts: cfg.restarts,
                ..AaConfig::default()
            };
            let r = estimate_aa(data.stats.as_ref().expect("computed above"), mode, &aa, seed)?;
            from_report(&r, data, &truth.signal)
        }
        BenchMethod::Em | BenchMethod::EmWsOnAsd => {
            let em = EmConfig {
                restarts: cfg.restarts,
                max_iter: cfg.em_max_iter,
                ..EmConfig::default()
            };
            let r = estimate_em(&data.y, mode, &em, seed)?;
            from_report(&r, data, &truth.signal)
        }
        BenchMethod::Deconv => {
            let z = oracle_distances(&data.y, &truth.signal)?;
            let x = deconv_estimate(&data.y, &z, truth.support.count(), spec.min_gap())?;
            baseline_result(&x, &truth.signal)
        }
        BenchMethod::KnownS => {
            let x = known_support_estimate(&data.y, &truth.support)?;
            baseline_result(&x, &truth.signal)
        }
    }
}

fn baseline_result(x: &Signal, truth: &Signal) -> Result<MethodResult, MtdError> {
    Ok(MethodResult {
        rmse: rmse(x, truth)?,
        rho0_error: None,
        rho1_rmse: None,
        objective: None,
    })
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

impl AggregateRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{:?},{},{},{},{}",
            self.method,
            self.sigma_index,
            self.sigma,
            self.trials_ok,
            fmt_opt(self.mean_rmse),
            fmt_opt(self.mean_rho0_error),
            fmt_opt(self.mean_rho1_rmse)
        )
    }
}

impl SlopeRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{:?},{:?},{},{}",
            self.method,
            self.sigma_lo,
            self.sigma_hi,
            self.points,
            fmt_opt(self.slope)
        )
    }
}

/// Per method × σ means over successful trials, in configuration order.
pub fn aggregate(cfg: &BenchConfig, raw: &[RawRow]) -> Vec<AggregateRow> {
    let mut out = Vec::new();
    for &m in &cfg.methods {
        for (si, &sigma) in cfg.sigma_grid.iter().enumerate() {
            let ok: Vec<&RawRow> = raw
                .iter()
                .filter(|r| r.method == m && r.sigma_index == si && r.status == "ok")
                .collect();
            out.push(AggregateRow {
                method: m,
                sigma_index: si,
                sigma,
                trials_ok: ok.len(),
                mean_rmse: mean(ok.iter().filter_map(|r| r.rmse)),
                mean_rho0_error: mean(ok.iter().filter_map(|r| r.rho0_error)),
                mean_rho1_rmse: mean(ok.iter().filter_map(|r| r.rho1_rmse)),
            });
        }
    }
    out
}

/// Least-squares slope of `log10 y` against `log10 x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

pub fn slopes(cfg: &BenchConfig, agg: &[AggregateRow]) -> Vec<SlopeRow> {
    let mut out = Vec::new();
    for &m in &cfg.methods {
        for &(lo, hi) in &cfg.slope_ranges {
            let pts: Vec<(f64, f64)> = agg
                .iter()
                .filter(|a| a.method == m && a.sigma >= lo * (1.0 - 1e-9) && a.sigma <= hi * (1.0 + 1e-9))
                .filter_map(|a| a.mean_rmse.filter(|v| *v > 0.0 && v.is_finite()).map(|v| (a.sigma, v)))
                .collect();
            out.push(SlopeRow {
                method: m,
                sigma_lo: lo,
                sigma_hi: hi,
                points: pts.len(),
                slope: loglog_slope(&pts),
            });
        }
    }
    out
}

/// Mean runtime per method × σ index from `timings.csv` rows.
pub fn mean_runtimes(timings: &[TimingRow]) -> BTreeMap<(BenchMethod, usize), f64> {
    let mut acc: BTreeMap<(BenchMethod, usize), (f64, usize)> = BTreeMap::new();
    for t in timings {
        let e = acc.entry((t.method, t.sigma_index)).or_default();
        e.0 += t.runtime_secs;
        e.1 += 1;
    }
    acc.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect()
}

/// Recomputes `aggregate.csv` and `slopes.csv` from `raw.csv` in a sweep directory.
pub fn rebuild_summaries(out: &Path) -> Result<(BenchConfig, Vec<AggregateRow>, Vec<SlopeRow>), CliError> {
    let paths = OutPaths::new(out);
    let cfg = BenchConfig::from_file(&paths.config)?;
    let raw = read_raw(&paths.raw)?;
    let agg = aggregate(&cfg, &raw);
    let sl = slopes(&cfg, &agg);
    write_csv(&paths.aggregate, AGGREGATE_HEADER, agg.iter().map(AggregateRow::to_csv))?;
    write_csv(&paths.slopes, SLOPES_HEADER, sl.iter().map(SlopeRow::to_csv))?;
    Ok((cfg, agg, sl))
}
