//! Coarse shift grids for frequency marching.
//!
//! The spatial resolution `Δx` is kept as an exact rational so that the
//! nearest-integer rounding `⌊kΔx⌉` (round half away from zero) never depends
//! on floating-point representation error.

use serde::{Deserialize, Serialize};

use crate::error::{MtdError, Result};

/// Spatial resolution `Δx = num / den`, always `>= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    num: usize,
    den: usize,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// `⌊a / b⌉` for integers, ties away from zero.
fn round_div(a: i64, b: i64) -> i64 {
    debug_assert!(b > 0);
    if a >= 0 {
        (2 * a + b) / (2 * b)
    } else {
        -((-2 * a + b) / (2 * b))
    }
}

impl Resolution {
    pub const FULL: Resolution = Resolution { num: 1, den: 1 };

    pub fn new(num: usize, den: usize) -> Result<Self> {
        if den == 0 || num < den {
            return Err(MtdError::invalid(format!(
                "resolution {num}/{den} must be a ratio >= 1"
            )));
        }
        let g = gcd(num, den);
        Ok(Resolution {
            num: num / g,
            den: den / g,
        })
    }

    /// Autocorrelation-fitting rule: `Δx = 1` when `n_max = (L-1)/2`, else `L / 2n_max`.
    pub fn for_aa(l: usize, n_max: usize) -> Result<Self> {
        if n_max == 0 || n_max > l / 2 {
            return Err(MtdError::invalid(format!(
                "n_max must lie in 1..={} for L = {l}, got {n_max}",
                l / 2
            )));
        }
        if 2 * n_max + 1 == l {
            Ok(Self::FULL)
        } else {
            Self::new(l, 2 * n_max)
        }
    }

    /// EM rule: `Δx = max(1, L / 2n_max)`.
    pub fn for_em(l: usize, n_max: usize) -> Result<Self> {
        if n_max == 0 || n_max > (l + 1) / 2 {
            return Err(MtdError::invalid(format!(
                "n_max must lie in 1..={} for L = {l}, got {n_max}",
                (l + 1) / 2
            )));
        }
        if 2 * n_max >= l {
            Ok(Self::FULL)
        } else {
            Self::new(l, 2 * n_max)
        }
    }

    pub fn is_full(&self) -> bool {
        self.num == self.den
    }

    pub fn as_f64(&self) -> f64 {
        self.num as f64 / self.den as f64
    }

    /// `⌊kΔx⌉`.
    pub fn round_mul(&self, k: i64) -> i64 {
        round_div(k * self.num as i64, self.den as i64)
    }

    /// `⌊f / Δx⌉`, the coarse index nearest to fine index `f`.
    pub fn nearest_coarse(&self, f: i64) -> i64 {
        round_div(f * self.den as i64, self.num as i64)
    }

    /// Number of coarse units `L' = L / Δx`, rounded.
    pub fn grid_len(&self, l: usize) -> usize {
        round_div((l * self.den) as i64, self.num as i64) as usize
    }

    /// Fine shifts `⌊kΔx⌉` for `k = 0..count`.
    pub fn fine_shifts(&self, count: usize) -> Vec<usize> {
        (0..count).map(|k| self.round_mul(k as i64) as usize).collect()
    }

    /// Inclusive window `⌊(k-½)Δx⌉ ..= ⌊(k+½)Δx⌉ - 1` of fine indices that bin `k` covers,
    /// clamped below at 0. Empty windows are returned as `None`.
    pub fn bin(&self, k: usize) -> Option<(usize, usize)> {
        let lo = round_div((2 * k as i64 - 1) * self.num as i64, 2 * self.den as i64).max(0);
        let hi = round_div((2 * k as i64 + 1) * self.num as i64, 2 * self.den as i64) - 1;
        (hi >= lo).then_some((lo as usize, hi as usize))
    }
}

/// Frequency-marching schedule for autocorrelation fitting: `n_max = 1..=⌊L/2⌋`.
pub fn aa_schedule(l: usize) -> Vec<(usize, Resolution)> {
    (1..=l / 2)
        .map(|n| (n, Resolution::for_aa(l, n).expect("n_max within schedule")))
        .collect()
}

/// EM schedule: `n_max = 1..=⌊(L+1)/2⌋`.
pub fn em_schedule(l: usize) -> Vec<(usize, Resolution)> {
    (1..=(l + 1) / 2)
        .map(|n| (n, Resolution::for_em(l, n).expect("n_max within schedule")))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounding_is_half_away_from_zero() {
        assert_eq!(round_div(5, 2), 3);
        assert_eq!(round_div(-5, 2), -3);
        assert_eq!(round_div(7, 3), 2);
        assert_eq!(round_div(0, 4), 0);
    }

    #[test]
    fn aa_rule() {
        let r = Resolution::for_aa(10, 1).unwrap();
        assert_eq!(r.as_f64(), 5.0);
        assert_eq!(r.grid_len(10), 2);
        assert!(Resolution::for_aa(10, 5).unwrap().is_full());
        assert!(Resolution::for_aa(11, 5).unwrap().is_full());
        let r = Resolution::for_aa(11, 4).unwrap();
        assert_eq!(r.grid_len(11), 8);
        assert!(Resolution::for_aa(10, 6).is_err());
    }

    #[test]
    fn em_rule() {
        assert!(Resolution::for_em(11, 6).unwrap().is_full());
        assert_eq!(Resolution::for_em(11, 5).unwrap().grid_len(11), 10);
        assert_eq!(em_schedule(10).len(), 5);
        assert_eq!(em_schedule(11).len(), 6);
    }

    #[test]
    fn bins_at_delta_five() {
        let r = Resolution::for_aa(10, 1).unwrap();
        assert_eq!(r.bin(0), Some((0, 2)));
        assert_eq!(r.bin(1), Some((3, 7)));
        assert_eq!(r.bin(2), Some((8, 12)));
    }

    #[test]
    fn full_resolution_bins_are_singletons() {
        for k in 0..20 {
            assert_eq!(Resolution::FULL.bin(k), Some((k, k)));
            assert_eq!(Resolution::FULL.round_mul(k as i64), k as i64);
        }
    }

    #[test]
    fn exact_ties_round_up() {
        // Δx = 5/3: (1 + ½)·5/3 = 2.5 exactly.
        let r = Resolution::for_aa(10, 3).unwrap();
        assert_eq!(r.bin(1), Some((1, 2)));
        assert_eq!(r.fine_shifts(6), vec![0, 2, 3, 5, 7, 8]);
    }
}
