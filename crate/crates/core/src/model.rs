//! Domain types, synthetic measurement generation, the pair separation
//! function and the relative error metric.

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{MtdError, Result};
use crate::rng::rng_from_seed;

/// Consecutive rejections tolerated by [`generate_support_rejection`].
pub const DEFAULT_REJECTION_CAP: u64 = 1_000_000;

const BUNDLED_SIGNAL: &str = include_str!("../data/signal_l10.txt");

/// Spacing regime assumed by an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Consecutive starts at least `2L-1` apart.
    Ws,
    /// Arbitrary spacing distribution with gaps of at least `L`.
    Asd,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Ws => "ws",
            Mode::Asd => "asd",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = MtdError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ws" => Ok(Mode::Ws),
            "asd" => Ok(Mode::Asd),
            other => Err(MtdError::invalid(format!("unknown mode '{other}', expected ws or asd"))),
        }
    }
}

/// The unknown length-`L` signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    values: Vec<f64>,
}

impl Signal {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(MtdError::invalid("signal must have positive length"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MtdError::invalid(format!("signal entry {i} is not finite")));
        }
        Ok(Signal { values })
    }

    pub fn zeros(len: usize) -> Self {
        Signal {
            values: vec![0.0; len.max(1)],
        }
    }

    /// The bundled length-10 test signal, scaled to `‖x‖₂ = √10`.
    pub fn bundled() -> Self {
        let raw: Vec<f64> = BUNDLED_SIGNAL
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse().expect("bundled signal is well formed"))
            .collect();
        let len = raw.len() as f64;
        Signal { values: raw }.scaled_to_norm(len.sqrt())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Returns a copy rescaled to the given Euclidean norm. A zero signal is returned unchanged.
    pub fn scaled_to_norm(&self, target: f64) -> Signal {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        Signal {
            values: self.values.iter().map(|v| v * target / n).collect(),
        }
    }

    /// A random signal with i.i.d. standard normal entries rescaled to `‖x‖₂ = √L`.
    pub fn random_normalized<R: Rng>(len: usize, rng: &mut R) -> Signal {
        let values: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        Signal { values }.scaled_to_norm((len as f64).sqrt())
    }
}

/// Sorted start indices of the signal occurrences inside a length-`N` measurement.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportSequence {
    starts: Vec<usize>,
    n: usize,
    l: usize,
}

impl SupportSequence {
    /// Validates ordering, bounds and non-overlap (consecutive starts differ by at least `L`).
    pub fn new(starts: Vec<usize>, n: usize, l: usize) -> Result<Self> {
        if l == 0 || n < l {
            return Err(MtdError::invalid(format!(
                "need 1 <= L <= N, got L={l}, N={n}"
            )));
        }
        if let Some(&last) = starts.last() {
            if last > n - l {
                return Err(MtdError::invalid(format!(
                    "start {last} exceeds N-L = {}",
                    n - l
                )));
            }
        }
        for w in starts.windows(2) {
            if w[1] < w[0] + l {
                return Err(MtdError::invalid(format!(
                    "starts {} and {} are closer than L = {l}",
                    w[0], w[1]
                )));
            }
        }
        Ok(SupportSequence { starts, n, l })
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    pub fn num_samples(&self) -> usize {
        self.n
    }

    pub fn signal_len(&self) -> usize {
        self.l
    }

    pub fn count(&self) -> usize {
        self.starts.len()
    }

    /// Smallest difference between consecutive starts, `None` for fewer than two.
    pub fn min_gap(&self) -> Option<usize> {
        self.starts.windows(2).map(|w| w[1] - w[0]).min()
    }

    /// Signal density `ML/N`.
    pub fn density(&self) -> f64 {
        (self.count() * self.l) as f64 / self.n as f64
    }
}

/// Distribution of gaps between consecutive occurrence starts.
///
/// `mass[g]` is the probability of gap `g`; entries below `L` are zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSeparationFunction {
    l: usize,
    mass: Vec<f64>,
}

impl PairSeparationFunction {
    pub fn new(l: usize, mut mass: Vec<f64>) -> Result<Self> {
        if l == 0 {
            return Err(MtdError::invalid("L must be positive"));
        }
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(MtdError::invalid("gap masses must be finite and nonnegative"));
        }
        if mass.iter().take(l).any(|&m| m != 0.0) {
            return Err(MtdError::invalid(format!(
                "gaps below L = {l} must carry zero mass"
            )));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(MtdError::invalid(format!(
                "gap masses sum to {total}, expected 1"
            )));
        }
        while mass.len() > l && mass.last() == Some(&0.0) {
            mass.pop();
        }
        Ok(PairSeparationFunction { l, mass })
    }

    /// Builds a distribution from `(gap, weight)` pairs, normalizing the weights.
    pub fn from_weights(l: usize, weights: &[(usize, f64)]) -> Result<Self> {
        let total: f64 = weights.iter().map(|(_, w)| w).sum();
        if !(total > 0.0) {
            return Err(MtdError::invalid("gap weights must have positive total"));
        }
        let max_gap = weights.iter().map(|(g, _)| *g).max().unwrap_or(l);
        let mut mass = vec![0.0; max_gap + 1];
        for &(g, w) in weights {
            mass[g] += w / total;
        }
        PairSeparationFunction::new(l, mass)
    }

    /// All mass at a single gap.
    pub fn point_mass(l: usize, gap: usize) -> Result<Self> {
        Self::from_weights(l, &[(gap, 1.0)])
    }

    /// Default benchmark law: mass on gaps `L..=3L` decaying linearly to zero.
    pub fn linear_decay(l: usize) -> Self {
        let hi = 3 * l;
        let weights: Vec<(usize, f64)> = (l..=hi).map(|g| (g, (hi + 1 - g) as f64)).collect();
        Self::from_weights(l, &weights).expect("linear decay weights are valid")
    }

    pub fn signal_len(&self) -> usize {
        self.l
    }

    pub fn mass(&self, gap: usize) -> f64 {
        self.mass.get(gap).copied().unwrap_or(0.0)
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    /// Largest gap with (possibly zero) stored mass.
    pub fn max_gap(&self) -> usize {
        self.mass.len().saturating_sub(1)
    }

    /// `(gap, mass)` for every gap with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.mass
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0.0)
            .map(|(g, &m)| (g, m))
    }

    /// Total-variation distance `½ Σ |p − q|`.
    pub fn total_variation(&self, other: &PairSeparationFunction) -> f64 {
        let len = self.mass.len().max(other.mass.len());
        0.5 * (0..len)
            .map(|g| (self.mass(g) - other.mass(g)).abs())
            .sum::<f64>()
    }

    /// `ρ1[i] = ρ0 ξ[i+L]` for `i = 0..L-1`.
    pub fn rho1(&self, rho0: f64) -> Vec<f64> {
        (0..self.l - 1).map(|i| rho0 * self.mass(i + self.l)).collect()
    }
}

/// Ground truth attached to synthetic measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub signal: Signal,
    pub support: SupportSequence,
}

/// A noisy length-`N` measurement with known signal length and noise level.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    samples: Vec<f64>,
    l: usize,
    sigma: f64,
    truth: Option<GroundTruth>,
}

impl Measurement {
    pub fn new(samples: Vec<f64>, l: usize, sigma: f64) -> Result<Self> {
        if l == 0 || samples.len() < l {
            return Err(MtdError::invalid(format!(
                "need 1 <= L <= N, got L={l}, N={}",
                samples.len()
            )));
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(MtdError::invalid(format!("sigma must be >= 0, got {sigma}")));
        }
        Ok(Measurement {
            samples,
            l,
            sigma,
            truth: None,
        })
    }

    pub fn with_truth(mut self, truth: GroundTruth) -> Result<Self> {
        if truth.signal.len() != self.l || truth.support.signal_len() != self.l {
            return Err(MtdError::invalid("ground truth length does not match L"));
        }
        if truth.support.num_samples() != self.samples.len() {
            return Err(MtdError::invalid("ground truth support does not match N"));
        }
        self.truth = Some(truth);
        Ok(self)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn signal_len(&self) -> usize {
        self.l
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn truth(&self) -> Option<&GroundTruth> {
        self.truth.as_ref()
    }
}

/// Occurrence density and the scaled near-neighbour gap law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    pub rho0: f64,
    /// `rho1[i] = rho0 · ξ[i+L]`, length `L-1`.
    pub rho1: Vec<f64>,
}

impl DensityParams {
    pub fn new(rho0: f64, rho1: Vec<f64>) -> Result<Self> {
        if !(rho0 > 0.0 && rho0 <= 1.0) {
            return Err(MtdError::invalid(format!("rho0 must lie in (0, 1], got {rho0}")));
        }
        if rho1.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
            return Err(MtdError::invalid("rho1 entries must be finite and >= 0"));
        }
        let total: f64 = rho1.iter().sum();
        if total > rho0 * (1.0 + 1e-12) {
            return Err(MtdError::invalid(format!(
                "sum of rho1 ({total}) exceeds rho0 ({rho0})"
            )));
        }
        Ok(DensityParams { rho0, rho1 })
    }

    /// Well-separated parameters: `ρ1 ≡ 0`.
    pub fn well_separated(rho0: f64, l: usize) -> Result<Self> {
        Self::new(rho0, vec![0.0; l.saturating_sub(1)])
    }

    /// Parameters implied by a support: `ρ0 = ML/N`, `ρ1` from its pair separation function.
    pub fn from_support(support: &SupportSequence) -> Result<Self> {
        let rho0 = support.density();
        let xi = pair_separation(support)?;
        Self::new(rho0, xi.rho1(rho0))
    }
}

/// Places `m` starts in `[0, N-L]` by uniform one-by-one rejection so that any two
/// accepted starts differ by at least `L+W`.
pub fn generate_support_rejection(
    n: usize,
    l: usize,
    m: usize,
    w: usize,
    seed: u64,
) -> Result<SupportSequence> {
    generate_support_rejection_capped(n, l, m, w, seed, DEFAULT_REJECTION_CAP)
}

/// [`generate_support_rejection`] with an explicit cap on consecutive rejections.
pub fn generate_support_rejection_capped(
    n: usize,
    l: usize,
    m: usize,
    w: usize,
    seed: u64,
    max_rejections: u64,
) -> Result<SupportSequence> {
    if l == 0 || n < l {
        return Err(MtdError::invalid(format!("need 1 <= L <= N, got L={l}, N={n}")));
    }
    let span = n - l + 1;
    let min_sep = l + w;
    let mut rng = rng_from_seed(seed);
    // blocked[c] marks candidates within min_sep of an accepted start.
    let mut blocked = vec![false; span];
    let mut starts = Vec::with_capacity(m);
    let mut rejections = 0u64;
    while starts.len() < m {
        let c = rng.gen_range(0..span);
        if blocked[c] {
            rejections += 1;
            if rejections > max_rejections {
                return Err(MtdError::PlacementFailure {
                    placed: starts.len(),
                    target: m,
                    rejections,
                });
            }
            continue;
        }
        rejections = 0;
        starts.push(c);
        let lo = c.saturating_sub(min_sep - 1);
        let hi = (c + min_sep - 1).min(span - 1);
        blocked[lo..=hi].iter_mut().for_each(|b| *b = true);
    }
    starts.sort_unstable();
    SupportSequence::new(starts, n, l)
}

/// Sequential construction with i.i.d. gaps drawn from `xi`.
///
/// The first start is uniform in `[0, L)`; generation stops at `target_m`
/// occurrences or when the next start would pass `N-L`.
pub fn generate_support_from_psf(
    n: usize,
    l: usize,
    xi: &PairSeparationFunction,
    target_m: usize,
    seed: u64,
) -> Result<SupportSequence> {
    if xi.signal_len() != l {
        return Err(MtdError::invalid("pair separation function built for a different L"));
    }
    if target_m < 2 {
        return Err(MtdError::invalid("target_M must be at least 2"));
    }
    if n < l {
        return Err(MtdError::TooFewOccurrences { fitted: 0 });
    }
    let support: Vec<(usize, f64)> = xi.support().collect();
    let gaps = WeightedIndex::new(support.iter().map(|(_, m)| *m))
        .map_err(|e| MtdError::invalid(format!("bad gap law: {e}")))?;
    let mut rng = rng_from_seed(seed);
    let last_allowed = n - l;
    let first = rng.gen_range(0..l.min(last_allowed + 1));
    let mut starts = vec![first];
    while starts.len() < target_m {
        let gap = support[gaps.sample(&mut rng)].0;
        let next = starts[starts.len() - 1] + gap;
        if next > last_allowed {
            break;
        }
        starts.push(next);
    }
    if starts.len() < 2 {
        return Err(MtdError::TooFewOccurrences {
            fitted: starts.len(),
        });
    }
    SupportSequence::new(starts, n, l)
}

/// `y = s ∗ x + ε` with `ε ~ N(0, σ² I)`; the ground truth is attached.
pub fn synthesize(
    support: &SupportSequence,
    x: &Signal,
    sigma: f64,
    seed: u64,
) -> Result<Measurement> {
    let l = x.len();
    if support.signal_len() != l {
        return Err(MtdError::invalid("support and signal disagree on L"));
    }
    if !(sigma >= 0.0) {
        return Err(MtdError::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    let mut y = vec![0.0; support.num_samples()];
    for &s in support.starts() {
        for (dst, v) in y[s..s + l].iter_mut().zip(x.values()) {
            *dst += v;
        }
    }
    if sigma > 0.0 {
        let mut rng = rng_from_seed(seed);
        for v in y.iter_mut() {
            let e: f64 = rng.sample(StandardNormal);
            *v += sigma * e;
        }
    }
    Measurement::new(y, l, sigma)?.with_truth(GroundTruth {
        signal: x.clone(),
        support: support.clone(),
    })
}

/// Empirical gap histogram normalized by `M-1`.
pub fn pair_separation(support: &SupportSequence) -> Result<PairSeparationFunction> {
    let m = support.count();
    if m < 2 {
        return Err(MtdError::invalid(format!(
            "pair separation needs at least 2 occurrences, got {m}"
        )));
    }
    let max_gap = support.min_gap().map(|_| {
        support
            .starts()
            .windows(2)
            .map(|w| w[1] - w[0])
            .max()
            .unwrap_or(0)
    });
    let mut counts = vec![0usize; max_gap.unwrap_or(0) + 1];
    for w in support.starts().windows(2) {
        counts[w[1] - w[0]] += 1;
    }
    let denom = (m - 1) as f64;
    let mut mass: Vec<f64> = counts.iter().map(|&c| c as f64 / denom).collect();
    // Counts sum to M-1 exactly; fold the rounding residue into the largest bin.
    let residue = 1.0 - mass.iter().sum::<f64>();
    if let Some(imax) = (0..mass.len()).max_by(|&a, &b| mass[a].total_cmp(&mass[b])) {
        mass[imax] += residue;
    }
    PairSeparationFunction::new(support.signal_len(), mass)
}

/// `‖x̂ − x‖₂ / ‖x‖₂`, without alignment.
pub fn rmse(estimate: &Signal, truth: &Signal) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(MtdError::invalid(format!(
            "length mismatch: {} vs {}",
            estimate.len(),
            truth.len()
        )));
    }
    let tn = truth.norm();
    if tn == 0.0 {
        return Err(MtdError::ZeroNorm);
    }
    let diff: f64 = estimate
        .values()
        .iter()
        .zip(truth.values())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(diff.sqrt() / tn)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn assert_support_ok(s: &SupportSequence, min_sep: usize) {
        let n = s.num_samples();
        let l = s.signal_len();
        assert!(s.starts().iter().all(|&v| v <= n - l));
        if let Some(g) = s.min_gap() {
            assert!(g >= min_sep, "gap {g} < {min_sep}");
        }
    }

    #[test]
    fn rejection_paper_ws_parameters() {
        let s = generate_support_rejection(1_000_000, 10, 30_000, 9, 11).unwrap();
        assert_eq!(s.count(), 30_000);
        assert_support_ok(&s, 19);
        assert!((s.density() - 0.3).abs() < 1e-15);
    }

    #[test]
    fn rejection_tight_packing_forces_gap() {
        let mut feasible = 0;
        for seed in 0..60 {
            match generate_support_rejection_capped(20, 10, 2, 0, seed, 1_000) {
                Ok(s) => {
                    assert_eq!(s.starts(), &[0, 10]);
                    feasible += 1;
                }
                Err(e) => assert!(matches!(e, MtdError::PlacementFailure { placed: 1, .. })),
            }
        }
        assert!(feasible > 0);
    }

    #[test]
    fn rejection_is_deterministic() {
        let a = generate_support_rejection(10_000, 10, 400, 0, 5).unwrap();
        let b = generate_support_rejection(10_000, 10, 400, 0, 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejection_infeasible_density_errors() {
        let err = generate_support_rejection_capped(100, 10, 20, 0, 1, 10_000).unwrap_err();
        assert!(matches!(err, MtdError::PlacementFailure { .. }));
    }

    /// Independent oracle for the rejection process: ordered-set membership tests.
    fn oracle_rejection_gaps(n: usize, l: usize, m: usize, w: usize, seed: u64, hist: &mut Vec<u64>) {
        let mut rng = rng_from_seed(seed);
        let mut accepted = BTreeSet::new();
        let sep = l + w;
        while accepted.len() < m {
            let c: usize = rng.gen_range(0..=n - l);
            let lo = c.saturating_sub(sep - 1);
            if accepted.range(lo..c + sep).next().is_none() {
                accepted.insert(c);
            }
        }
        let v: Vec<usize> = accepted.into_iter().collect();
        for g in v.windows(2).map(|p| p[1] - p[0]) {
            if hist.len() <= g {
                hist.resize(g + 1, 0);
            }
            hist[g] += 1;
        }
    }

    #[test]
    fn rejection_gap_law_matches_monte_carlo_oracle() {
        let (n, l, m, w) = (10_000, 10, 500, 0);
        let mut oracle = Vec::new();
        for rep in 0..10_000u64 {
            oracle_rejection_gaps(n, l, m, w, 1_000_000 + rep, &mut oracle);
        }
        let total: u64 = oracle.iter().sum();
        let law = PairSeparationFunction::from_weights(
            l,
            &oracle
                .iter()
                .enumerate()
                .map(|(g, &c)| (g, c as f64 / total as f64))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        // A single output carries only M-1 = 499 gaps, whose sampling error alone is
        // comparable to 0.05 in total variation; pool 40 independent outputs.
        let mut pooled: Vec<(usize, f64)> = Vec::new();
        for seed in 0..40 {
            let s = generate_support_rejection(n, l, m, w, seed).unwrap();
            assert_support_ok(&s, l + w);
            let xi = pair_separation(&s).unwrap();
            pooled.extend(xi.support());
        }
        let pooled = PairSeparationFunction::from_weights(l, &pooled).unwrap();
        let tv = pooled.total_variation(&law);
        assert!(tv <= 0.05, "total variation {tv}");
    }

    #[test]
    fn psf_point_mass_gives_progression() {
        let xi = PairSeparationFunction::point_mass(10, 10).unwrap();
        let s = generate_support_from_psf(1000, 10, &xi, 50, 3).unwrap();
        assert_eq!(s.count(), 50);
        let s0 = s.starts()[0];
        for (k, &v) in s.starts().iter().enumerate() {
            assert_eq!(v, s0 + 10 * k);
        }
    }

    #[test]
    fn psf_generation_recovers_law() {
        let xi = PairSeparationFunction::from_weights(10, &[(10, 0.5), (11, 0.5)]).unwrap();
        let s = generate_support_from_psf(100_000, 10, &xi, 5000, 9).unwrap();
        assert_eq!(s.count(), 5000);
        let est = pair_separation(&s).unwrap();
        assert!(est.total_variation(&xi) <= 0.05);
    }

    #[test]
    fn psf_generation_respects_support_restriction() {
        let xi = PairSeparationFunction::from_weights(10, &[(19, 1.0), (25, 2.0), (40, 1.0)]).unwrap();
        let s = generate_support_from_psf(50_000, 10, &xi, 1000, 4).unwrap();
        assert!(s.min_gap().unwrap() >= 19);
        assert_support_ok(&s, 19);
    }

    #[test]
    fn psf_generation_truncates_at_end() {
        let xi = PairSeparationFunction::point_mass(10, 30).unwrap();
        let s = generate_support_from_psf(100, 10, &xi, 50, 0).unwrap();
        assert!(s.count() < 50);
        assert!(generate_support_from_psf(25, 10, &xi, 5, 0).is_err());
    }

    #[test]
    fn synthesize_single_occurrence_is_identity() {
        let x = Signal::bundled();
        let s = SupportSequence::new(vec![0], 10, 10).unwrap();
        let y = synthesize(&s, &x, 0.0, 0).unwrap();
        assert_eq!(y.samples(), x.values());
    }

    #[test]
    fn synthesize_adjacent_occurrences_concatenate() {
        let x = Signal::bundled();
        let s = SupportSequence::new(vec![0, 10], 20, 10).unwrap();
        let y = synthesize(&s, &x, 0.0, 0).unwrap();
        assert_eq!(&y.samples()[..10], x.values());
        assert_eq!(&y.samples()[10..], x.values());
    }

    #[test]
    fn synthesize_matches_dense_convolution() {
        let x = Signal::bundled();
        let s = generate_support_rejection(10_000, 10, 300, 0, 2).unwrap();
        let y = synthesize(&s, &x, 0.0, 0).unwrap();
        let mut indicator = vec![0.0; 10_000 - 10 + 1];
        for &k in s.starts() {
            indicator[k] = 1.0;
        }
        for i in 0..10_000 {
            let mut acc = 0.0;
            for (j, xv) in x.values().iter().enumerate() {
                if i >= j && i - j < indicator.len() {
                    acc += indicator[i - j] * xv;
                }
            }
            assert!((acc - y.samples()[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn synthesize_noise_variance() {
        let x = Signal::bundled();
        let n = 1_000_000;
        let s = generate_support_rejection(n, 10, 30_000, 9, 1).unwrap();
        let clean = synthesize(&s, &x, 0.0, 0).unwrap();
        let noisy = synthesize(&s, &x, 2.0, 77).unwrap();
        let resid: Vec<f64> = noisy
            .samples()
            .iter()
            .zip(clean.samples())
            .map(|(a, b)| a - b)
            .collect();
        let mean = resid.iter().sum::<f64>() / n as f64;
        let var = resid.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / (n - 1) as f64;
        assert!((var - 4.0).abs() <= 0.02, "variance {var}");
    }

    #[test]
    fn pair_separation_examples() {
        let s = SupportSequence::new(vec![0, 10, 20], 30, 10).unwrap();
        let xi = pair_separation(&s).unwrap();
        assert_eq!(xi.mass(10), 1.0);
        let s = SupportSequence::new(vec![0, 10, 25], 40, 10).unwrap();
        let xi = pair_separation(&s).unwrap();
        assert_eq!(xi.mass(10), 0.5);
        assert_eq!(xi.mass(15), 0.5);
        assert_eq!(xi.mass(11), 0.0);
        let s = SupportSequence::new(vec![3], 40, 10).unwrap();
        assert!(pair_separation(&s).is_err());
    }

    #[test]
    fn rmse_examples() {
        let x = Signal::bundled();
        assert_eq!(rmse(&x, &x).unwrap(), 0.0);
        let twice = Signal::new(x.values().iter().map(|v| 2.0 * v).collect()).unwrap();
        assert!((rmse(&twice, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((rmse(&Signal::zeros(10), &x).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(rmse(&x, &Signal::zeros(10)), Err(MtdError::ZeroNorm)));
    }

    #[test]
    fn bundled_signal_norm() {
        let x = Signal::bundled();
        assert_eq!(x.len(), 10);
        assert!((x.norm() - 10f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn density_params_validation() {
        assert!(DensityParams::new(0.5, vec![0.1, 0.2]).is_ok());
        assert!(DensityParams::new(0.0, vec![]).is_err());
        assert!(DensityParams::new(0.5, vec![0.4, 0.2]).is_err());
        assert!(DensityParams::new(0.5, vec![-0.1]).is_err());
    }

    #[test]
    fn linear_decay_law() {
        let xi = PairSeparationFunction::linear_decay(10);
        assert_eq!(xi.max_gap(), 30);
        assert!(xi.mass(10) > xi.mass(20));
        assert!((xi.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn generated_supports_are_valid(seed in any::<u64>(), m in 1usize..60, w in 0usize..12) {
                let l = 6;
                let n = 2000;
                let s = generate_support_rejection(n, l, m, w, seed).unwrap();
                prop_assert_eq!(s.count(), m);
                if let Some(g) = s.min_gap() { prop_assert!(g >= l + w); }
                prop_assert!(*s.starts().last().unwrap() <= n - l);
                if m >= 2 {
                    let xi = pair_separation(&s).unwrap();
                    prop_assert!((xi.masses().iter().sum::<f64>() - 1.0).abs() < 1e-12);
                }
            }

            #[test]
            fn rmse_is_nonnegative_and_zero_iff_equal(v in proptest::collection::vec(-5.0f64..5.0, 4), d in proptest::collection::vec(-1.0f64..1.0, 4)) {
                prop_assume!(v.iter().any(|x| x.abs() > 1e-3));
                let t = Signal::new(v.clone()).unwrap();
                let e = Signal::new(v.iter().zip(&d).map(|(a, b)| a + b).collect()).unwrap();
                let r = rmse(&e, &t).unwrap();
                prop_assert!(r >= 0.0);
                prop_assert_eq!(r == 0.0, e == t);
            }
        }
    }
}
