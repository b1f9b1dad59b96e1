//! Reference estimators that use ground-truth information.

use std::collections::BTreeSet;

use crate::error::{MtdError, Result};
use crate::model::{Measurement, Signal, SupportSequence};

/// Squared distances between the true signal and every length-`L` window.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleDistances {
    pub z: Vec<f64>,
}

/// `z[i] = Σ_l (x[l] - y[i+l])²` for `0 <= i <= N-L`.
pub fn oracle_distances(y: &Measurement, x_true: &Signal) -> Result<OracleDistances> {
    let l = x_true.len();
    if l != y.signal_len() || y.len() < l {
        return Err(MtdError::invalid("signal length does not match the measurement"));
    }
    let s = y.samples();
    let x = x_true.values();
    let z = (0..=s.len() - l)
        .map(|i| x.iter().zip(&s[i..i + l]).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    Ok(OracleDistances { z })
}

/// Greedy selection by ascending `z` (lower index first on ties), skipping
/// any index closer than `min_gap` to one already chosen. Returns sorted indices.
pub fn deconv_select(z: &OracleDistances, m: usize, min_gap: usize) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(MtdError::invalid("M must be at least 1"));
    }
    let mut order: Vec<usize> = (0..z.z.len()).collect();
    order.sort_by(|&a, &b| z.z[a].total_cmp(&z.z[b]).then(a.cmp(&b)));
    let mut chosen = BTreeSet::new();
    for i in order {
        if chosen.len() == m {
            break;
        }
        let lo = (i + 1).saturating_sub(min_gap);
        if chosen.range(lo..i + min_gap).next().is_none() {
            chosen.insert(i);
        }
    }
    if chosen.len() < m {
        return Err(MtdError::InsufficientPicks {
            picked: chosen.len(),
            requested: m,
        });
    }
    Ok(chosen.into_iter().collect())
}

fn average_windows(y: &Measurement, starts: &[usize]) -> Result<Signal> {
    let l = y.signal_len();
    if starts.is_empty() {
        return Err(MtdError::invalid("no windows to average"));
    }
    let s = y.samples();
    let mut acc = vec![0.0; l];
    for &i in starts {
        for (a, v) in acc.iter_mut().zip(&s[i..i + l]) {
            *a += v;
        }
    }
    let m = starts.len() as f64;
    Signal::new(acc.into_iter().map(|v| v / m).collect())
}

/// Oracle-assisted deconvolution: mean of the `M` greedily selected windows.
pub fn deconv_estimate(y: &Measurement, z: &OracleDistances, m: usize, min_gap: usize) -> Result<Signal> {
    if z.z.len() + y.signal_len() != y.len() + 1 {
        return Err(MtdError::invalid("distance vector does not match the measurement"));
    }
    average_windows(y, &deconv_select(z, m, min_gap)?)
}

/// Mean of the windows at the true occurrence starts.
pub fn known_support_estimate(y: &Measurement, support: &SupportSequence) -> Result<Signal> {
    if support.num_samples() != y.len() || support.signal_len() != y.signal_len() {
        return Err(MtdError::invalid("support does not match the measurement"));
    }
    if support.count() == 0 {
        return Err(MtdError::invalid("support is empty"));
    }
    average_windows(y, support.starts())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_support_rejection, rmse, synthesize};
    use crate::rng::rng_from_seed;
    use rand::Rng;

    #[test]
    fn distances_match_naive_loop() {
        let mut rng = rng_from_seed(1);
        let y: Vec<f64> = (0..100).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let x = Signal::random_normalized(7, &mut rng);
        let m = Measurement::new(y.clone(), 7, 1.0).unwrap();
        let z = oracle_distances(&m, &x).unwrap();
        assert_eq!(z.z.len(), 94);
        for i in 0..94 {
            let mut d = 0.0;
            for l in 0..7 {
                d += (x.values()[l] - y[i + l]).powi(2);
            }
            assert!((z.z[i] - d).abs() <= 1e-12 * d.max(1.0));
        }
    }

    #[test]
    fn zero_measurement_distances_are_signal_energy() {
        let x = Signal::bundled();
        let m = Measurement::new(vec![0.0; 50], 10, 0.0).unwrap();
        let z = oracle_distances(&m, &x).unwrap();
        assert!(z.z.iter().all(|&v| (v - 10.0).abs() < 1e-12));
    }

    #[test]
    fn noiseless_baselines_are_exact() {
        let x = Signal::bundled();
        let s = generate_support_rejection(10_000, 10, 300, 9, 2).unwrap();
        let y = synthesize(&s, &x, 0.0, 0).unwrap();
        let z = oracle_distances(&y, &x).unwrap();
        for &i in s.starts() {
            assert_eq!(z.z[i], 0.0);
        }
        let picks = deconv_select(&z, 300, 19).unwrap();
        assert_eq!(picks, s.starts());
        assert!(rmse(&deconv_estimate(&y, &z, 300, 19).unwrap(), &x).unwrap() < 1e-12);
        assert!(rmse(&known_support_estimate(&y, &s).unwrap(), &x).unwrap() < 1e-12);
    }

    #[test]
    fn greedy_respects_exclusion_and_ties() {
        let z = OracleDistances { z: vec![1.0, 0.0, 0.0, 5.0, 0.5, 2.0, 0.0] };
        // Order (z, index): 1, 2, 6, 4, 0, 5, 3; 2 and 4, 0, 5, 3 fall within 3 of a pick.
        assert_eq!(deconv_select(&z, 2, 3).unwrap(), vec![1, 6]);
        assert!(matches!(
            deconv_select(&z, 3, 3),
            Err(MtdError::InsufficientPicks { picked: 2, requested: 3 })
        ));
        assert_eq!(deconv_select(&z, 3, 2).unwrap(), vec![1, 4, 6]);
        let picks = deconv_select(&OracleDistances { z: vec![0.0; 50] }, 5, 10).unwrap();
        assert_eq!(picks, vec![0, 10, 20, 30, 40]);
    }

    #[test]
    fn known_support_error_matches_averaging_variance() {
        let x = Signal::bundled();
        let sigma = 0.5;
        let mut ratios = Vec::new();
        for trial in 0..20 {
            let s = generate_support_rejection(100_000, 10, 3_000, 9, trial).unwrap();
            let y = synthesize(&s, &x, sigma, 100 + trial).unwrap();
            let e = rmse(&known_support_estimate(&y, &s).unwrap(), &x).unwrap();
            // RMSE relative to ‖x‖: σ √L / (√M ‖x‖).
            ratios.push(e / (sigma * 10f64.sqrt() / (3_000f64.sqrt() * x.norm())));
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((0.5..=2.0).contains(&mean), "{mean}");
    }
}
