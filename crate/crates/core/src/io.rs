//! File formats.
//!
//! Measurement files are binary: magic `MTDM`, `u32` version, `u64 N`,
//! `u64 L`, `f64 σ`, then `N` little-endian `f64` samples. Signals and
//! supports are text with one value per line, pair separation functions are
//! `gap mass` lines, and statistics, priors and reports are JSON.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::em::EmPriors;
use crate::error::{MtdError, Result};
use crate::model::{Measurement, PairSeparationFunction, Signal, SupportSequence};
use crate::moments::MomentStats;
use crate::report::TraceRow;

pub const MAGIC: &[u8; 4] = b"MTDM";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8;

fn io_err(path: &Path, source: std::io::Error) -> MtdError {
    MtdError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(path: &Path, offset: usize, message: impl Into<String>) -> MtdError {
    MtdError::Parse {
        path: path.to_path_buf(),
        offset: offset as u64,
        message: message.into(),
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| io_err(path, e))
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| parse_err(path, e.utf8_error().valid_up_to(), "invalid UTF-8"))
}

/// Writes through a buffered file handle.
pub fn write_file(path: &Path, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

pub fn write_measurement(path: &Path, y: &Measurement) -> Result<()> {
    write_file(path, |w| {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(y.len() as u64).to_le_bytes())?;
        w.write_all(&(y.signal_len() as u64).to_le_bytes())?;
        w.write_all(&y.sigma().to_le_bytes())?;
        for v in y.samples() {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    })
}

pub fn read_measurement(path: &Path) -> Result<Measurement> {
    let b = read_bytes(path)?;
    if b.len() < HEADER_LEN {
        return Err(parse_err(path, b.len(), "truncated header"));
    }
    if &b[..4] != MAGIC {
        return Err(parse_err(path, 0, "bad magic, expected MTDM"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().expect("4 bytes"));
    let u64_at = |o: usize| u64::from_le_bytes(b[o..o + 8].try_into().expect("8 bytes"));
    let version = u32_at(4);
    if version != VERSION {
        return Err(parse_err(path, 4, format!("unsupported version {version}")));
    }
    let n = u64_at(8) as usize;
    let l = u64_at(16) as usize;
    let sigma = f64::from_bits(u64_at(24));
    let expected = n.checked_mul(8).and_then(|v| v.checked_add(HEADER_LEN));
    if expected != Some(b.len()) {
        return Err(parse_err(
            path,
            b.len().min(HEADER_LEN + 8 * (b.len().saturating_sub(HEADER_LEN) / 8)),
            format!("header declares {n} samples but the payload holds {}", (b.len().saturating_sub(HEADER_LEN)) / 8),
        ));
    }
    let mut samples = Vec::with_capacity(n);
    for i in 0..n {
        let o = HEADER_LEN + 8 * i;
        let v = f64::from_bits(u64_at(o));
        if !v.is_finite() {
            return Err(parse_err(path, o, "non-finite sample"));
        }
        samples.push(v);
    }
    Measurement::new(samples, l, sigma).map_err(|e| parse_err(path, 16, e.to_string()))
}

/// Non-empty, non-comment lines with their byte offsets.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    let mut offset = 0;
    text.split_inclusive('\n').filter_map(move |raw| {
        let start = offset;
        offset += raw.len();
        let t = raw.trim();
        (!t.is_empty() && !t.starts_with('#')).then_some((start, t))
    })
}

fn parse_f64(path: &Path, offset: usize, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_err(path, offset, format!("expected a finite number, found '{s}'")))
}

fn parse_usize(path: &Path, offset: usize, s: &str) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| parse_err(path, offset, format!("expected a nonnegative integer, found '{s}'")))
}

pub fn write_signal(path: &Path, x: &Signal) -> Result<()> {
    write_file(path, |w| {
        for v in x.values() {
            writeln!(w, "{v:?}")?;
        }
        Ok(())
    })
}

pub fn read_signal(path: &Path) -> Result<Signal> {
    let text = read_text(path)?;
    let values = lines(&text)
        .map(|(o, t)| parse_f64(path, o, t))
        .collect::<Result<Vec<_>>>()?;
    Signal::new(values).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn write_support(path: &Path, s: &SupportSequence) -> Result<()> {
    write_file(path, |w| {
        for v in s.starts() {
            writeln!(w, "{v}")?;
        }
        Ok(())
    })
}

/// Reads occurrence starts for a length-`n` measurement of length-`l` signals.
pub fn read_support(path: &Path, n: usize, l: usize) -> Result<SupportSequence> {
    let text = read_text(path)?;
    let starts = lines(&text)
        .map(|(o, t)| parse_usize(path, o, t))
        .collect::<Result<Vec<_>>>()?;
    SupportSequence::new(starts, n, l).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn write_psf(path: &Path, xi: &PairSeparationFunction) -> Result<()> {
    write_file(path, |w| {
        for (g, m) in xi.support() {
            writeln!(w, "{g} {m:?}")?;
        }
        Ok(())
    })
}

/// Reads `gap mass` lines; masses are normalized to sum to one.
pub fn read_psf(path: &Path, l: usize) -> Result<PairSeparationFunction> {
    let text = read_text(path)?;
    let mut weights = Vec::new();
    for (o, t) in lines(&text) {
        let mut it = t.split_whitespace();
        let (Some(g), Some(m), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(path, o, "expected 'gap mass'"));
        };
        let g = parse_usize(path, o, g)?;
        let m = parse_f64(path, o, m)?;
        if m < 0.0 {
            return Err(parse_err(path, o, "mass must be nonnegative"));
        }
        weights.push((g, m));
    }
    PairSeparationFunction::from_weights(l, &weights).map_err(|e| parse_err(path, 0, e.to_string()))
}

pub fn write_stats(path: &Path, s: &MomentStats) -> Result<()> {
    write_file(path, |w| writeln!(w, "{}", s.to_json()))
}

pub fn read_stats(path: &Path) -> Result<MomentStats> {
    let text = read_text(path)?;
    MomentStats::from_json(&text).map_err(|m| parse_err(path, json_offset(&text, &m), m))
}

pub fn write_priors(path: &Path, p: &EmPriors) -> Result<()> {
    let text = serde_json::to_string_pretty(p).expect("priors serialize");
    write_file(path, |w| writeln!(w, "{text}"))
}

pub fn read_priors(path: &Path) -> Result<EmPriors> {
    let text = read_text(path)?;
    let p: EmPriors = serde_json::from_str(&text).map_err(|e| {
        let m = e.to_string();
        parse_err(path, json_offset(&text, &m), m)
    })?;
    match &p {
        EmPriors::Ws { alpha } => EmPriors::ws(alpha.clone()),
        EmPriors::Asd { alpha0, alpha1, rho1 } => EmPriors::asd(*alpha0, *alpha1, rho1.clone()),
    }
    .map_err(|e| parse_err(path, 0, e.to_string()))
}

/// Byte offset for a serde_json message ending in "line L column C".
fn json_offset(text: &str, message: &str) -> usize {
    let nums: Vec<usize> = message
        .rsplit(|c: char| !c.is_ascii_digit())
        .filter(|s| !s.is_empty())
        .take(2)
        .filter_map(|s| s.parse().ok())
        .collect();
    let (Some(&col), Some(&line)) = (nums.first(), nums.get(1)) else {
        return 0;
    };
    if !message.contains("line") {
        return 0;
    }
    let start: usize = text.split_inclusive('\n').take(line.saturating_sub(1)).map(str::len).sum();
    (start + col.saturating_sub(1)).min(text.len())
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<()> {
    write_file(path, |w| {
        writeln!(w, "stage,iteration,loglik")?;
        for r in rows {
            writeln!(w, "{},{},{:?}", r.stage, r.iteration, r.loglik)?;
        }
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_support_rejection, synthesize};
    use crate::moments::measurement_moments;

    #[test]
    fn measurement_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("y.bin");
        let s = generate_support_rejection(1_000, 10, 20, 9, 1).unwrap();
        let y = synthesize(&s, &Signal::bundled(), 0.3, 2).unwrap();
        write_measurement(&p, &y).unwrap();
        let back = read_measurement(&p).unwrap();
        assert_eq!(back.samples(), y.samples());
        assert_eq!(back.sigma(), 0.3);
        assert_eq!(back.signal_len(), 10);
        assert_eq!(fs::metadata(&p).unwrap().len(), 32 + 8_000);
    }

    #[test]
    fn measurement_errors_carry_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        fs::write(&p, b"XXXX").unwrap();
        assert!(matches!(read_measurement(&p), Err(MtdError::Parse { offset: 4, .. })));
        let mut b = Vec::from(&MAGIC[..]);
        b.extend(2u32.to_le_bytes());
        b.extend([0u8; 24]);
        fs::write(&p, &b).unwrap();
        assert!(matches!(read_measurement(&p), Err(MtdError::Parse { offset: 4, .. })));
        let missing = dir.path().join("missing.bin");
        let err = read_measurement(&missing).unwrap_err();
        assert!(err.to_string().contains("missing.bin"));
    }

    #[test]
    fn text_formats_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let x = Signal::bundled();
        let p = dir.path().join("x.txt");
        write_signal(&p, &x).unwrap();
        assert_eq!(read_signal(&p).unwrap(), x);

        let s = generate_support_rejection(500, 10, 10, 0, 3).unwrap();
        let p = dir.path().join("s.txt");
        write_support(&p, &s).unwrap();
        assert_eq!(read_support(&p, 500, 10).unwrap(), s);

        let xi = PairSeparationFunction::linear_decay(10);
        let p = dir.path().join("psf.txt");
        write_psf(&p, &xi).unwrap();
        let back = read_psf(&p, 10).unwrap();
        assert!(back.total_variation(&xi) < 1e-15);
    }

    #[test]
    fn text_parse_error_offset() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.txt");
        fs::write(&p, "1.0\n2.0\nabc\n").unwrap();
        match read_signal(&p) {
            Err(MtdError::Parse { offset, .. }) => assert_eq!(offset, 8),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn stats_and_priors_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let y = synthesize(
            &generate_support_rejection(2_000, 10, 50, 9, 4).unwrap(),
            &Signal::bundled(),
            0.7,
            5,
        )
        .unwrap();
        let s = measurement_moments(&y).unwrap();
        let p = dir.path().join("stats.json");
        write_stats(&p, &s).unwrap();
        assert_eq!(read_stats(&p).unwrap(), s);
        let text = fs::read_to_string(&p).unwrap();
        for key in ["\"N\"", "\"L\"", "\"sigma\"", "\"a1\"", "\"a2\"", "\"a3\""] {
            assert!(text.contains(key));
        }

        let pr = EmPriors::uniform_asd(10);
        let p = dir.path().join("priors.json");
        write_priors(&p, &pr).unwrap();
        assert_eq!(read_priors(&p).unwrap(), pr);

        fs::write(&p, "{\n  \"mode\": \"ws\",\n  \"alpha\": [1.0, oops]\n}").unwrap();
        match read_priors(&p) {
            Err(MtdError::Parse { offset, .. }) => assert!(offset > 20 && offset < 40, "{offset}"),
            other => panic!("{other:?}"),
        }
    }
}
