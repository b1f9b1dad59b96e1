//! Coarse-grained statistics used by frequency marching.

use crate::error::{MtdError, Result};
use crate::grid::Resolution;
use crate::model::PairSeparationFunction;
use crate::moments::{tri_index, tri_len, tri_pairs, MomentStats};

/// Bias-corrected, bin-averaged measurement autocorrelations on a coarse grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseStats {
    pub n_max: usize,
    pub resolution: Resolution,
    /// Signal length of the underlying fine problem.
    pub l: usize,
    /// Coarse length `L'`.
    pub grid: usize,
    pub b1: f64,
    pub b2: Vec<f64>,
    /// Row-major upper triangle over the coarse grid.
    pub b3: Vec<f64>,
}

impl CoarseStats {
    pub fn b3_at(&self, k1: usize, k2: usize) -> f64 {
        let (i, j) = if k1 <= k2 { (k1, k2) } else { (k2, k1) };
        self.b3[tri_index(self.grid, i, j)]
    }
}

/// Coarse statistics at the autocorrelation-fitting resolution for `n_max`.
pub fn coarsen_measurement(stats: &MomentStats, n_max: usize) -> Result<CoarseStats> {
    let res = Resolution::for_aa(stats.l, n_max)?;
    coarsen_measurement_at(stats, res, n_max)
}

pub fn coarsen_measurement_at(stats: &MomentStats, res: Resolution, n_max: usize) -> Result<CoarseStats> {
    let l = stats.l;
    let g = res.grid_len(l);
    let s2 = stats.sigma * stats.sigma;
    let bins: Vec<(usize, usize)> = (0..g)
        .map(|k| match res.bin(k) {
            Some((lo, hi)) if lo < l => Ok((lo, hi.min(l - 1))),
            _ => Err(MtdError::EmptyBin { order: 2, bin: k }),
        })
        .collect::<Result<_>>()?;

    let corrected2 = |i: usize| stats.a2[i] - if i == 0 { s2 } else { 0.0 };
    let b2 = bins
        .iter()
        .map(|&(lo, hi)| (lo..=hi).map(corrected2).sum::<f64>() / (hi - lo + 1) as f64)
        .collect();

    let bias = stats.a1 * s2;
    let mut b3 = Vec::with_capacity(tri_len(g));
    for (k1, k2) in tri_pairs(g) {
        let (lo1, hi1) = bins[k1];
        let (lo2, hi2) = bins[k2];
        let mut sum = 0.0;
        let mut count = 0usize;
        for i1 in lo1..=hi1 {
            for i2 in lo2.max(i1)..=hi2 {
                let deltas = usize::from(i1 == 0) + usize::from(i2 == 0) + usize::from(i1 == i2);
                sum += stats.a3_at(i1, i2) - bias * deltas as f64;
                count += 1;
            }
        }
        if count == 0 {
            return Err(MtdError::EmptyBin { order: 3, bin: tri_index(g, k1, k2) });
        }
        b3.push(sum / count as f64);
    }

    Ok(CoarseStats {
        n_max,
        resolution: res,
        l,
        grid: g,
        b1: stats.a1,
        b2,
        b3,
    })
}

/// Gap masses rebinned onto a coarse grid: entry `i` collects the fine gaps in
/// the window `⌊(i-½)Δx⌉ ..= ⌊(i+½)Δx⌉ - 1`.
pub fn rebin_gaps(mass: &[f64], res: Resolution) -> Vec<f64> {
    let mut out = Vec::new();
    for i in 0.. {
        let Some((lo, hi)) = res.bin(i) else {
            out.push(0.0);
            continue;
        };
        if lo >= mass.len() {
            break;
        }
        out.push(mass[lo..=hi.min(mass.len() - 1)].iter().sum());
    }
    out
}

/// Coarse pair separation function for the autocorrelation schedule stage `n_max`.
pub fn coarsen_psf(xi: &PairSeparationFunction, n_max: usize, l: usize) -> Result<Vec<f64>> {
    let res = Resolution::for_aa(l, n_max)?;
    Ok(rebin_gaps(xi.masses(), res))
}

/// Spreads coarse cross-term weights `rho1` (indexed by coarse gap `i + L'`)
/// uniformly over the fine gaps in `[L, 2L-2]` their bins cover.
pub fn spread_rho1(rho1: &[f64], res: Resolution, l: usize) -> Vec<f64> {
    let g = res.grid_len(l);
    let mut fine = vec![0.0; 2 * l - 1];
    for (i, &w) in rho1.iter().enumerate() {
        let Some((lo, hi)) = res.bin(i + g) else {
            continue;
        };
        let (lo, hi) = (lo.max(l), hi.min(2 * l - 2));
        if hi < lo {
            continue;
        }
        let share = w / (hi - lo + 1) as f64;
        fine[lo..=hi].iter_mut().for_each(|f| *f += share);
    }
    fine
}

/// Moves cross-term weights from one grid to another through the fine gap law.
pub fn transfer_rho1(rho1: &[f64], from: Resolution, to: Resolution, l: usize) -> Vec<f64> {
    let fine = spread_rho1(rho1, from, l);
    let coarse = rebin_gaps(&fine, to);
    let g = to.grid_len(l);
    (0..g - 1).map(|i| coarse.get(i + g).copied().unwrap_or(0.0)).collect()
}
