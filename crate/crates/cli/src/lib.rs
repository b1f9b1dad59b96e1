//! Command implementations and the benchmark harness behind the `mtd` binary.

pub mod bench;
pub mod commands;
pub mod config;

use std::fmt;

use mtd_core::model::{generate_support_from_psf, generate_support_rejection};
use mtd_core::rng::{derive_seed, label};
use mtd_core::{Measurement, Mode, MtdError, PairSeparationFunction, Signal};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable holding the worker thread count.
pub const WORKERS_ENV: &str = "MTD_WORKERS";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<MtdError> for CliError {
    fn from(e: MtdError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

/// Parameters of one synthetic instance.
#[derive(Debug, Clone)]
pub struct InstanceSpec {
    pub num_samples: usize,
    pub density: f64,
    pub sigma: f64,
    pub mode: Mode,
    /// Overrides the mode's default separation `W`.
    pub w: Option<usize>,
    /// Gap law for sequential generation; rejection sampling is used without it.
    pub psf: Option<PairSeparationFunction>,
    pub signal: Signal,
}

impl InstanceSpec {
    pub fn length(&self) -> usize {
        self.signal.len()
    }

    pub fn extra_gap(&self) -> usize {
        self.w.unwrap_or(match self.mode {
            Mode::Ws => self.length() - 1,
            Mode::Asd => 0,
        })
    }

    /// Occurrence count `M = ⌊ρ0 N / L⌉`.
    pub fn target_count(&self) -> usize {
        (self.density * self.num_samples as f64 / self.length() as f64).round() as usize
    }

    /// Smallest admissible gap between consecutive starts.
    pub fn min_gap(&self) -> usize {
        match &self.psf {
            Some(xi) => xi.support().map(|(g, _)| g).min().unwrap_or(self.length()),
            None => self.length() + self.extra_gap(),
        }
    }

    /// Draws the support and noise from independent streams derived from `seed`.
    pub fn generate(&self, seed: u64) -> Result<Measurement, MtdError> {
        let l = self.length();
        let m = self.target_count();
        let support_seed = derive_seed(seed, &[label("support")]);
        let support = match &self.psf {
            Some(xi) => generate_support_from_psf(self.num_samples, l, xi, m, support_seed)?,
            None => generate_support_rejection(self.num_samples, l, m, self.extra_gap(), support_seed)?,
        };
        mtd_core::synthesize(&support, &self.signal, self.sigma, derive_seed(seed, &[label("noise")]))
    }
}

/// Sets the global worker pool size from `MTD_WORKERS`, if present.
pub fn init_workers(explicit: Option<usize>) -> Result<(), CliError> {
    let n = match explicit {
        Some(n) => Some(n),
        None => match std::env::var(WORKERS_ENV) {
            Ok(v) => Some(
                v.trim()
                    .parse::<usize>()
                    .map_err(|_| CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got '{v}'")))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(CliError::Usage("worker count must be at least 1".into()));
        }
        // A pool may already exist when called twice in one process; keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}
