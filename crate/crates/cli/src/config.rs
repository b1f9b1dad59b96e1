//! Flat `key = value` benchmark configuration.
//!
//! ```text
//! # ws sweep
//! sigma_log10 = -1:0.6:9      # start:stop:count, log-spaced
//! trials = 20
//! num_samples = 1000000
//! length = 10
//! density = 0.3
//! mode = ws
//! methods = aa, deconv, known-s
//! seed = 1
//! slope_ranges_log10 = 0.2:0.6, -1:-0.5
//! ```
//!
//! Keys: `sigma` (comma list) or `sigma_log10`, `trials`, `num_samples`,
//! `length`, `density`, `mode`, `w`, `psf_file`, `signal_file`, `methods`,
//! `seed`, `restarts`, `em_max_iter`, `slope_ranges_log10`.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use mtd_core::Mode;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BenchMethod {
    Aa,
    Em,
    Deconv,
    KnownS,
    AaWsOnAsd,
    EmWsOnAsd,
}

impl BenchMethod {
    pub const ALL: [BenchMethod; 6] = [
        BenchMethod::Aa,
        BenchMethod::Em,
        BenchMethod::Deconv,
        BenchMethod::KnownS,
        BenchMethod::AaWsOnAsd,
        BenchMethod::EmWsOnAsd,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BenchMethod::Aa => "aa",
            BenchMethod::Em => "em",
            BenchMethod::Deconv => "deconv",
            BenchMethod::KnownS => "known-s",
            BenchMethod::AaWsOnAsd => "aa-ws-on-asd",
            BenchMethod::EmWsOnAsd => "em-ws-on-asd",
        }
    }
}

impl fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        BenchMethod::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sigma_grid: Vec<f64>,
    pub trials: usize,
    pub num_samples: usize,
    pub length: usize,
    pub density: f64,
    pub mode: Mode,
    /// Extra separation beyond `L`; defaults to `L-1` (ws) or `0` (asd).
    pub w: Option<usize>,
    pub psf_file: Option<PathBuf>,
    pub signal_file: Option<PathBuf>,
    pub methods: Vec<BenchMethod>,
    pub seed: u64,
    pub restarts: usize,
    pub em_max_iter: usize,
    /// Inclusive σ ranges over which log-log slopes are fitted.
    pub slope_ranges: Vec<(f64, f64)>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sigma_grid: log_grid(-1.0, 0.6, 9),
            trials: 20,
            num_samples: 1_000_000,
            length: 10,
            density: 0.3,
            mode: Mode::Ws,
            w: None,
            psf_file: None,
            signal_file: None,
            methods: vec![BenchMethod::Aa, BenchMethod::Em, BenchMethod::Deconv, BenchMethod::KnownS],
            seed: 0,
            restarts: 10,
            em_max_iter: 1000,
            slope_ranges: Vec::new(),
        }
    }
}

/// `count` points `10^t` with `t` evenly spaced over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![10f64.powf(lo)],
        _ => (0..count)
            .map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (count - 1) as f64))
            .collect(),
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("{key}: cannot parse '{v}'"))
}

fn parse_range(key: &str, v: &str) -> Result<(f64, f64), String> {
    let (a, b) = v.split_once(':').ok_or_else(|| format!("{key}: expected lo:hi, got '{v}'"))?;
    Ok((parse_num(key, a.trim())?, parse_num(key, b.trim())?))
}

impl BenchConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let mut cfg = BenchConfig::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::Usage(format!("{}:{}: expected key = value", path.display(), i + 1)));
            };
            cfg.set(k.trim(), v.trim())
                .map_err(|m| CliError::Usage(format!("{}:{}: {m}", path.display(), i + 1)))?;
        }
        cfg.validate().map_err(CliError::Usage)?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<(), String> {
        let list = || v.split(',').map(str::trim).filter(|s| !s.is_empty());
        match key {
            "sigma" => self.sigma_grid = list().map(|s| parse_num(key, s)).collect::<Result<_, _>>()?,
            "sigma_log10" => {
                let parts: Vec<&str> = v.split(':').map(str::trim).collect();
                let [lo, hi, n] = parts[..] else {
                    return Err(format!("{key}: expected start:stop:count, got '{v}'"));
                };
                self.sigma_grid = log_grid(parse_num(key, lo)?, parse_num(key, hi)?, parse_num(key, n)?);
            }
            "trials" => self.trials = parse_num(key, v)?,
            "num_samples" => self.num_samples = parse_num(key, v)?,
            "length" => self.length = parse_num(key, v)?,
            "density" => self.density = parse_num(key, v)?,
            "mode" => self.mode = v.parse().map_err(|e| format!("{key}: {e}"))?,
            "w" => self.w = Some(parse_num(key, v)?),
            "psf_file" => self.psf_file = Some(PathBuf::from(v)),
            "signal_file" => self.signal_file = Some(PathBuf::from(v)),
            "methods" => self.methods = list().map(str::parse).collect::<Result<_, _>>()?,
            "seed" => self.seed = parse_num(key, v)?,
            "restarts" => self.restarts = parse_num(key, v)?,
            "em_max_iter" => self.em_max_iter = parse_num(key, v)?,
            "slope_ranges_log10" => {
                self.slope_ranges = list()
                    .map(|r| parse_range(key, r).map(|(a, b)| (10f64.powf(a), 10f64.powf(b))))
                    .collect::<Result<_, _>>()?
            }
            _ => return Err(format!("unknown key '{key}'")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sigma_grid.is_empty() {
            return Err("sigma grid is empty".into());
        }
        if self.sigma_grid.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err("sigma values must be finite and >= 0".into());
        }
        if self.trials == 0 {
            return Err("trials must be at least 1".into());
        }
        if self.methods.is_empty() {
            return Err("no methods selected".into());
        }
        if self.restarts == 0 {
            return Err("restarts must be at least 1".into());
        }
        if self.length < 2 || self.num_samples < 2 * self.length {
            return Err("need length >= 2 and num_samples >= 2 * length".into());
        }
        if !(self.density > 0.0 && self.density < 1.0) {
            return Err("density must lie in (0, 1)".into());
        }
        Ok(())
    }

    /// Separation beyond `L` used for generation and as the deconvolution exclusion radius.
    pub fn extra_gap(&self) -> usize {
        self.w.unwrap_or(match self.mode {
            Mode::Ws => self.length - 1,
            Mode::Asd => 0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_example() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.cfg");
        std::fs::write(
            &p,
            "# ws sweep\nsigma_log10 = -1:0.6:9\ntrials = 3\nmode = asd\nmethods = aa, known-s\nslope_ranges_log10 = 0.2:0.6\n",
        )
        .unwrap();
        let c = BenchConfig::from_file(&p).unwrap();
        assert_eq!(c.sigma_grid.len(), 9);
        assert!((c.sigma_grid[0] - 0.1).abs() < 1e-15);
        assert_eq!(c.trials, 3);
        assert_eq!(c.mode, Mode::Asd);
        assert_eq!(c.methods, vec![BenchMethod::Aa, BenchMethod::KnownS]);
        assert_eq!(c.extra_gap(), 0);
        assert_eq!(c.slope_ranges.len(), 1);
    }

    #[test]
    fn rejects_unknown_keys_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("b.cfg");
        std::fs::write(&p, "trials = 2\nbogus = 1\n").unwrap();
        let err = BenchConfig::from_file(&p).unwrap_err().to_string();
        assert!(err.contains(":2:") && err.contains("bogus"), "{err}");
        std::fs::write(&p, "trials = 0\n").unwrap();
        assert!(BenchConfig::from_file(&p).is_err());
    }
}
