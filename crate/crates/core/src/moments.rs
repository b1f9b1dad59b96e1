//! Autocorrelations of the measurement and of the signal, and the forward
//! models that relate them.
//!
//! Measurement statistics are accumulated in one pass over fixed-size chunks;
//! each chunk yields a [`PartialMoments`] that carries its first and last
//! `L-1` samples so that products straddling a chunk boundary are added when
//! neighbouring partials are merged.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MtdError, Result};
use crate::grid::Resolution;
use crate::model::{DensityParams, Measurement, Signal};

/// Samples per chunk in [`measurement_moments`].
pub const CHUNK_LEN: usize = 4096;

/// Number of entries of an upper-triangular `n × n` table.
pub fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Row-major position of `(i, j)`, `i <= j < n`, in an upper-triangular table.
pub fn tri_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < n);
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Iterates `(l1, l2)` with `l1 <= l2 < n` in storage order.
pub fn tri_pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i..n).map(move |j| (i, j)))
}

/// Predicted standard-deviation scales of the estimation error per order.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NoiseFloor {
    pub order1: f64,
    pub order2: f64,
    pub order3: f64,
}

impl NoiseFloor {
    pub fn new(n: usize, sigma: f64) -> Self {
        if n == 0 {
            return NoiseFloor::default();
        }
        let rn = (n as f64).sqrt();
        let s2 = sigma * sigma;
        NoiseFloor {
            order1: sigma / rn,
            order2: (s2 + s2 * s2).sqrt() / rn,
            order3: (s2 + s2 * s2 * s2).sqrt() / rn,
        }
    }
}

/// First three autocorrelations of a measurement, or a model prediction of them.
///
/// `n == 0` marks a prediction from a forward model.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentStats {
    pub n: usize,
    pub l: usize,
    pub sigma: f64,
    pub a1: f64,
    /// `a2[l]` for `0 <= l < L`.
    pub a2: Vec<f64>,
    /// `a3[l1, l2]` for `0 <= l1 <= l2 < L`, row-major upper triangle.
    pub a3: Vec<f64>,
    pub noise_floor: NoiseFloor,
}

#[derive(Serialize, Deserialize)]
struct StatsFile {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "L")]
    l: usize,
    sigma: f64,
    a1: f64,
    a2: Vec<f64>,
    a3: Vec<f64>,
}

impl MomentStats {
    pub fn new(n: usize, l: usize, sigma: f64, a1: f64, a2: Vec<f64>, a3: Vec<f64>) -> Result<Self> {
        if l == 0 || a2.len() != l || a3.len() != tri_len(l) {
            return Err(MtdError::invalid(format!(
                "moment tables have lengths {} and {}, expected {l} and {}",
                a2.len(),
                a3.len(),
                tri_len(l)
            )));
        }
        if !a1.is_finite() || a2.iter().chain(&a3).any(|v| !v.is_finite()) {
            return Err(MtdError::invalid("moment entries must be finite"));
        }
        Ok(MomentStats {
            n,
            l,
            sigma,
            a1,
            a2,
            a3,
            noise_floor: NoiseFloor::new(n, sigma),
        })
    }

    /// `a3[l1, l2]` for any order of the two shifts.
    pub fn a3_at(&self, l1: usize, l2: usize) -> f64 {
        let (i, j) = if l1 <= l2 { (l1, l2) } else { (l2, l1) };
        self.a3[tri_index(self.l, i, j)]
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&StatsFile {
            n: self.n,
            l: self.l,
            sigma: self.sigma,
            a1: self.a1,
            a2: self.a2.clone(),
            a3: self.a3.clone(),
        })
        .expect("stats serialize")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let f: StatsFile = serde_json::from_str(text).map_err(|e| e.to_string())?;
        MomentStats::new(f.n, f.l, f.sigma, f.a1, f.a2, f.a3).map_err(|e| e.to_string())
    }
}

/// Raw (unnormalized) sums over a contiguous run of samples plus boundary carries.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialMoments {
    l: usize,
    sigma: f64,
    count: u64,
    s1: f64,
    s2: Vec<f64>,
    s3: Vec<f64>,
    head: Vec<f64>,
    tail: Vec<f64>,
}

impl PartialMoments {
    pub fn empty(l: usize, sigma: f64) -> Self {
        PartialMoments {
            l,
            sigma,
            count: 0,
            s1: 0.0,
            s2: vec![0.0; l],
            s3: vec![0.0; tri_len(l)],
            head: Vec::new(),
            tail: Vec::new(),
        }
    }

    /// Sums over products whose indices all fall inside `samples`.
    pub fn from_samples(samples: &[f64], l: usize, sigma: f64) -> Self {
        let mut p = PartialMoments::empty(l, sigma);
        let n = samples.len();
        p.count = n as u64;
        let carry = l - 1;
        p.head = samples[..carry.min(n)].to_vec();
        p.tail = samples[n - carry.min(n)..].to_vec();
        let interior = n.saturating_sub(carry);
        for i in 0..n {
            let yi = samples[i];
            p.s1 += yi;
            if i < interior {
                // All shifts stay inside the chunk.
                let w = &samples[i..i + l];
                let mut k = 0;
                for l1 in 0..l {
                    let prod = yi * w[l1];
                    p.s2[l1] += prod;
                    for &v in &w[l1..] {
                        p.s3[k] += prod * v;
                        k += 1;
                    }
                }
            } else {
                let w = &samples[i..];
                for l1 in 0..w.len() {
                    let prod = yi * w[l1];
                    p.s2[l1] += prod;
                    let base = tri_index(l, l1, l1);
                    for (off, &v) in w[l1..].iter().enumerate() {
                        p.s3[base + off] += prod * v;
                    }
                }
            }
        }
        p
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    /// Concatenation of `self` followed by `next`.
    pub fn merge(&self, next: &PartialMoments) -> Result<PartialMoments> {
        if self.l != next.l || self.sigma.to_bits() != next.sigma.to_bits() {
            return Err(MtdError::IncompatiblePartials(format!(
                "(L={}, sigma={}) vs (L={}, sigma={})",
                self.l, self.sigma, next.l, next.sigma
            )));
        }
        if next.count == 0 {
            return Ok(self.clone());
        }
        if self.count == 0 {
            return Ok(next.clone());
        }
        let l = self.l;
        let carry = l - 1;
        let mut out = self.clone();
        out.count = self.count + next.count;
        out.s1 += next.s1;
        for (a, b) in out.s2.iter_mut().zip(&next.s2) {
            *a += b;
        }
        for (a, b) in out.s3.iter_mut().zip(&next.s3) {
            *a += b;
        }

        // Products whose first index is in `self` and last index is in `next`.
        let window: Vec<f64> = self.tail.iter().chain(&next.head).copied().collect();
        let t = self.tail.len();
        let end = window.len();
        for i in 0..t {
            for l1 in 0..l {
                let j1 = i + l1;
                if j1 >= end {
                    break;
                }
                let prod = window[i] * window[j1];
                if j1 >= t {
                    out.s2[l1] += prod;
                }
                for l2 in l1..l {
                    let j2 = i + l2;
                    if j2 >= end {
                        break;
                    }
                    if j2 >= t {
                        out.s3[tri_index(l, l1, l2)] += prod * window[j2];
                    }
                }
            }
        }

        let joined: Vec<f64>;
        out.head = if self.head.len() >= carry {
            self.head.clone()
        } else {
            joined = self.head.iter().chain(&next.head).copied().collect();
            joined[..carry.min(joined.len())].to_vec()
        };
        out.tail = if next.tail.len() >= carry {
            next.tail.clone()
        } else {
            let all: Vec<f64> = self.tail.iter().chain(&next.tail).copied().collect();
            all[all.len() - carry.min(all.len())..].to_vec()
        };
        Ok(out)
    }

    /// Normalizes by the total sample count.
    pub fn finish(&self) -> Result<MomentStats> {
        if self.count == 0 {
            return Err(MtdError::invalid("no samples accumulated"));
        }
        let n = self.count as f64;
        MomentStats::new(
            self.count as usize,
            self.l,
            self.sigma,
            self.s1 / n,
            self.s2.iter().map(|v| v / n).collect(),
            self.s3.iter().map(|v| v / n).collect(),
        )
    }
}

/// Merges partials pairwise, left to right, level by level.
pub fn tree_merge(mut parts: Vec<PartialMoments>) -> Result<PartialMoments> {
    if parts.is_empty() {
        return Err(MtdError::invalid("nothing to merge"));
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(a.merge(&b)?),
                None => next.push(a),
            }
        }
        parts = next;
    }
    Ok(parts.pop().expect("one partial remains"))
}

/// `a_y^1`, `a_y^2[l]`, `a_y^3[l1, l2]` of a measurement with `1/N` normalization and zero padding.
pub fn measurement_moments(y: &Measurement) -> Result<MomentStats> {
    let l = y.signal_len();
    if y.len() < 2 * l {
        return Err(MtdError::invalid(format!(
            "measurement length {} is below 2L = {}",
            y.len(),
            2 * l
        )));
    }
    let sigma = y.sigma();
    let parts: Vec<PartialMoments> = y
        .samples()
        .par_chunks(CHUNK_LEN)
        .map(|c| PartialMoments::from_samples(c, l, sigma))
        .collect();
    tree_merge(parts)?.finish()
}

/// Aperiodic autocorrelations of the signal (`1/L` normalization) for shifts `0..=max_shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMoments {
    pub l: usize,
    pub max_shift: usize,
    pub a1: f64,
    /// `a2[l]`, `0 <= l <= max_shift`.
    pub a2: Vec<f64>,
    /// Dense `(max_shift+1)²` table of `a3[p, q]` for nonnegative shifts.
    a3: Vec<f64>,
}

impl SignalMoments {
    /// `a_x^2[l]` for any integer shift.
    pub fn a2_at(&self, l: i64) -> f64 {
        self.a2.get(l.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    /// `a_x^3[l1, l2]` for any integer shifts, reduced by the permutation symmetries.
    pub fn a3_at(&self, l1: i64, l2: i64) -> f64 {
        let m = 0.min(l1).min(l2);
        let mut s = [(l1 - m) as usize, (l2 - m) as usize, (-m) as usize];
        s.sort_unstable();
        // s[0] == 0 after the shift.
        let (p, q) = (s[1], s[2]);
        let w = self.max_shift + 1;
        if q >= w {
            0.0
        } else {
            self.a3[p * w + q]
        }
    }
}

/// Signal autocorrelations up to `max_shift` (at most `2L-2`).
pub fn signal_moments(x: &Signal, max_shift: usize) -> Result<SignalMoments> {
    let l = x.len();
    if max_shift > 2 * l - 2 {
        return Err(MtdError::invalid(format!(
            "max_shift {max_shift} exceeds 2L-2 = {}",
            2 * l - 2
        )));
    }
    let v = x.values();
    let at = |i: usize| v.get(i).copied().unwrap_or(0.0);
    let lf = l as f64;
    let w = max_shift + 1;
    let a2 = (0..w)
        .map(|s| (0..l).map(|i| v[i] * at(i + s)).sum::<f64>() / lf)
        .collect();
    let mut a3 = vec![0.0; w * w];
    for p in 0..w {
        for q in p..w {
            let s = (0..l).map(|i| v[i] * at(i + p) * at(i + q)).sum::<f64>() / lf;
            a3[p * w + q] = s;
            a3[q * w + p] = s;
        }
    }
    Ok(SignalMoments {
        l,
        max_shift,
        a1: v.iter().sum::<f64>() / lf,
        a2,
        a3,
    })
}

/// Signal autocorrelations for nonnegative shifts below `L`, the only ones the
/// forward models read.
#[derive(Debug, Clone)]
pub(crate) struct DenseMoments {
    pub l: usize,
    pub a1: f64,
    pub a2: Vec<f64>,
    /// Symmetric `L × L`.
    pub a3: Vec<f64>,
}

impl DenseMoments {
    pub fn of(x: &[f64]) -> Self {
        let l = x.len();
        let lf = l as f64;
        let a2 = (0..l)
            .map(|s| (0..l - s).map(|i| x[i] * x[i + s]).sum::<f64>() / lf)
            .collect();
        let mut a3 = vec![0.0; l * l];
        for p in 0..l {
            for q in p..l {
                let s = (0..l - q).map(|i| x[i] * x[i + p] * x[i + q]).sum::<f64>() / lf;
                a3[p * l + q] = s;
                a3[q * l + p] = s;
            }
        }
        DenseMoments {
            l,
            a1: x.iter().sum::<f64>() / lf,
            a2,
            a3,
        }
    }

    pub fn a3(&self, p: usize, q: usize) -> f64 {
        self.a3[p * self.l + q]
    }

    /// Adds `Σ adjoint · ∂moment/∂x` to `grad`, given adjoints on `a1`, `a2[p]`
    /// and on `a3[p, q]` (`p <= q`, dense `L × L`, lower half ignored).
    pub fn accumulate_gradient(x: &[f64], g1: f64, g2: &[f64], g3: &[f64], grad: &mut [f64]) {
        let l = x.len();
        let lf = l as f64;
        let at = |i: isize| -> f64 {
            if i >= 0 && (i as usize) < l {
                x[i as usize]
            } else {
                0.0
            }
        };
        for (k, gk) in grad.iter_mut().enumerate() {
            let k = k as isize;
            let mut acc = g1;
            for (p, &w) in g2.iter().enumerate() {
                if w != 0.0 {
                    let p = p as isize;
                    acc += w * (at(k + p) + at(k - p));
                }
            }
            for p in 0..l {
                for q in p..l {
                    let w = g3[p * l + q];
                    if w == 0.0 {
                        continue;
                    }
                    let (p, q) = (p as isize, q as isize);
                    acc += w
                        * (at(k + p) * at(k + q)
                            + at(k - p) * at(k - p + q)
                            + at(k - q) * at(k - q + p));
                }
            }
            *gk += acc / lf;
        }
    }
}

/// Which coefficient multiplies a signal-moment term of the forward model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Coef {
    Rho0,
    Rho1(usize),
}

/// Term structure of the forward model on a (possibly coarse) shift grid.
///
/// Entry `l` of the second-order prediction is `Σ coef · a_x^2[p]` over
/// `terms2[l]`, with shifts already mapped to fine indices `⌊kΔx⌉`.
#[derive(Debug, Clone)]
pub(crate) struct ForwardModel {
    pub l: usize,
    pub grid: usize,
    pub terms2: Vec<Vec<(Coef, usize)>>,
    pub terms3: Vec<Vec<(Coef, usize, usize)>>,
    /// `δ[l1] + δ[l2] + δ[l1-l2]` per third-order entry.
    pub delta3: Vec<f64>,
}

impl ForwardModel {
    pub fn new(l: usize, res: Resolution, cross_terms: bool) -> Self {
        let g = res.grid_len(l);
        let fine = res.fine_shifts(g);
        let ordered = |a: usize, b: usize| if a <= b { (a, b) } else { (b, a) };
        let mut terms2 = Vec::with_capacity(g);
        for s in 0..g {
            let mut t = vec![(Coef::Rho0, fine[s])];
            if cross_terms {
                for j in g..g + s {
                    t.push((Coef::Rho1(j - g), fine[j - s]));
                }
            }
            terms2.push(t);
        }
        let mut terms3 = Vec::with_capacity(tri_len(g));
        let mut delta3 = Vec::with_capacity(tri_len(g));
        for (l1, l2) in tri_pairs(g) {
            let mut t = vec![(Coef::Rho0, fine[l1], fine[l2])];
            if cross_terms {
                for j in g..g + l2 - l1 {
                    let (p, q) = ordered(fine[j - l2], fine[j + l1 - l2]);
                    t.push((Coef::Rho1(j - g), p, q));
                }
                for j in g..g + l1 {
                    let (p, q) = ordered(fine[l2 - l1], fine[j - l1]);
                    t.push((Coef::Rho1(j - g), p, q));
                }
            }
            terms3.push(t);
            delta3.push(
                f64::from(u8::from(l1 == 0)) + f64::from(u8::from(l2 == 0)) + f64::from(u8::from(l1 == l2)),
            );
        }
        ForwardModel {
            l,
            grid: g,
            terms2,
            terms3,
            delta3,
        }
    }

    pub fn coef(c: Coef, rho0: f64, rho1: &[f64]) -> f64 {
        match c {
            Coef::Rho0 => rho0,
            Coef::Rho1(i) => rho1[i],
        }
    }

    /// Predicted `(a1, a2, a3)`; `sigma` enters only through the noise bias terms.
    pub fn predict(&self, m: &DenseMoments, rho0: f64, rho1: &[f64], sigma: f64) -> (f64, Vec<f64>, Vec<f64>) {
        let s2 = sigma * sigma;
        let p1 = rho0 * m.a1;
        let p2 = self
            .terms2
            .iter()
            .enumerate()
            .map(|(s, t)| {
                t.iter()
                    .map(|&(c, p)| Self::coef(c, rho0, rho1) * m.a2[p])
                    .sum::<f64>()
                    + if s == 0 { s2 } else { 0.0 }
            })
            .collect();
        let p3 = self
            .terms3
            .iter()
            .zip(&self.delta3)
            .map(|(t, &d)| {
                t.iter()
                    .map(|&(c, p, q)| Self::coef(c, rho0, rho1) * m.a3(p, q))
                    .sum::<f64>()
                    + rho0 * m.a1 * s2 * d
            })
            .collect();
        (p1, p2, p3)
    }
}

fn predicted_stats(x: &Signal, rho0: f64, rho1: &[f64], sigma: f64, cross: bool) -> MomentStats {
    let l = x.len();
    let model = ForwardModel::new(l, Resolution::FULL, cross);
    let (a1, a2, a3) = model.predict(&DenseMoments::of(x.values()), rho0, rho1, sigma);
    MomentStats {
        n: 0,
        l,
        sigma,
        a1,
        a2,
        a3,
        noise_floor: NoiseFloor::default(),
    }
}

/// Expected measurement autocorrelations for well-separated occurrences.
pub fn forward_ws(x: &Signal, rho0: f64, sigma: f64) -> MomentStats {
    predicted_stats(x, rho0, &[], sigma, false)
}

/// Expected measurement autocorrelations for an arbitrary spacing distribution.
pub fn forward_asd(x: &Signal, params: &DensityParams, sigma: f64) -> Result<MomentStats> {
    if params.rho1.len() + 1 != x.len() {
        return Err(MtdError::invalid(format!(
            "rho1 has length {}, expected L-1 = {}",
            params.rho1.len(),
            x.len() - 1
        )));
    }
    Ok(predicted_stats(x, params.rho0, &params.rho1, sigma, true))
}

/// Largest entrywise deviation between two moment sets, each entry taken
/// relative to the largest magnitude of its order in `reference`.
pub fn relative_discrepancy(stats: &MomentStats, reference: &MomentStats) -> f64 {
    fn order(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        a.iter()
            .zip(b)
            .map(|(u, v)| if scale > 0.0 { (u - v).abs() / scale } else { (u - v).abs() })
            .fold(0.0, f64::max)
    }
    order(&[stats.a1], &[reference.a1])
        .max(order(&stats.a2, &reference.a2))
        .max(order(&stats.a3, &reference.a3))
}
