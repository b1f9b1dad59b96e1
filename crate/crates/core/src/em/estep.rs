//! Posterior computation over shift configurations and the closed-form
//! signal update.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{MtdError, Result};
use crate::grid::Resolution;
use crate::model::{Mode, Signal};

use super::priors::{EmPriors, PriorWeights};
use super::segments::SegmentSet;

/// Segments per parallel work item; the reduction order is fixed by this size.
const SEGMENT_CHUNK: usize = 1024;

/// Single-occurrence shifts and, for arbitrary spacing, two-occurrence pairs,
/// on a grid of length `G` mapped to fine shifts `⌊kΔx⌉`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSpace {
    pub l: usize,
    pub grid: usize,
    pub resolution: Resolution,
    pub mode: Mode,
    /// Fine shift of single configuration `k`, `0 <= k < 2G`.
    pub singles: Vec<usize>,
    /// Coarse `(k1, k2)` with `G < k1 < 2G`, `0 < k2 <= k1 - G`.
    pub pairs: Vec<(usize, usize)>,
}

impl ConfigSpace {
    pub fn new(l: usize, res: Resolution, mode: Mode) -> Self {
        let g = res.grid_len(l);
        let singles = res.fine_shifts(2 * g);
        let pairs = if mode == Mode::Asd {
            (g + 1..2 * g)
                .flat_map(|k1| (1..=k1 - g).map(move |k2| (k1, k2)))
                .collect()
        } else {
            Vec::new()
        };
        ConfigSpace {
            l,
            grid: g,
            resolution: res,
            mode,
            singles,
            pairs,
        }
    }

    pub fn full(l: usize, mode: Mode) -> Self {
        Self::new(l, Resolution::FULL, mode)
    }

    /// Space matching the grid of `priors`.
    pub fn for_priors(l: usize, priors: &EmPriors) -> Result<Self> {
        let g = priors.grid_len();
        if g == 0 || g > l {
            return Err(MtdError::invalid(format!("prior grid {g} is not in 1..={l}")));
        }
        let res = if g == l { Resolution::FULL } else { Resolution::new(l, g)? };
        let mode = if priors.is_asd() { Mode::Asd } else { Mode::Ws };
        Ok(Self::new(l, res, mode))
    }

    pub fn len(&self) -> usize {
        self.singles.len() + self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn log_priors(&self, priors: &EmPriors) -> Result<Vec<f64>> {
        if priors.grid_len() != self.grid || priors.is_asd() != (self.mode == Mode::Asd) {
            return Err(MtdError::invalid("priors do not match the configuration space"));
        }
        let mut lp: Vec<f64> = (0..self.singles.len()).map(|k| priors.single(k).ln()).collect();
        lp.extend(self.pairs.iter().map(|&(k1, k2)| priors.pair(k1, k2).ln()));
        if lp.iter().all(|v| *v == f64::NEG_INFINITY) {
            return Err(MtdError::invalid("all prior entries are zero"));
        }
        Ok(lp)
    }

    /// Gap index `k1 - k2 - G` of pair `p`.
    pub fn pair_gap(&self, p: usize) -> usize {
        let (k1, k2) = self.pairs[p];
        k1 - k2 - self.grid
    }
}

/// Per-segment posterior probabilities over a [`ConfigSpace`], singles first.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorTable {
    pub space: ConfigSpace,
    rows: Vec<f64>,
}

impl PosteriorTable {
    pub fn new(space: ConfigSpace, rows: Vec<f64>) -> Result<Self> {
        let k = space.len();
        if rows.is_empty() || rows.len() % k != 0 {
            return Err(MtdError::invalid("posterior rows do not match the configuration count"));
        }
        for (m, r) in rows.chunks(k).enumerate() {
            let s: f64 = r.iter().sum();
            if r.iter().any(|v| !(*v >= 0.0)) || (s - 1.0).abs() > 1e-12 {
                return Err(MtdError::invalid(format!("posterior row {m} is not a distribution")));
            }
        }
        Ok(PosteriorTable { space, rows })
    }

    pub fn num_segments(&self) -> usize {
        self.rows.len() / self.space.len()
    }

    pub fn row(&self, m: usize) -> &[f64] {
        let k = self.space.len();
        &self.rows[m * k..(m + 1) * k]
    }

    pub fn weights(&self) -> PriorWeights {
        let ns = self.space.singles.len();
        let mut w = PriorWeights {
            single: vec![0.0; ns],
            pair: vec![0.0; if self.space.mode == Mode::Asd { self.space.grid - 1 } else { 0 }],
        };
        for m in 0..self.num_segments() {
            let r = self.row(m);
            for (a, b) in w.single.iter_mut().zip(&r[..ns]) {
                *a += b;
            }
            for (p, &v) in r[ns..].iter().enumerate() {
                w.pair[self.space.pair_gap(p)] += v;
            }
        }
        w
    }
}

/// Everything a single segment contributes to one EM iteration.
#[derive(Debug, Clone)]
pub(crate) struct Accum {
    pub loglik: f64,
    pub single: Vec<f64>,
    pub pair: Vec<f64>,
    /// Posterior occupancy of each fine shift `0..2L`.
    pub occupancy: Vec<f64>,
    /// `Σ_m Σ_r w_m[r] y_m[j + L - r]`.
    pub num: Vec<f64>,
}

impl Accum {
    fn zeros(space: &ConfigSpace) -> Self {
        Accum {
            loglik: 0.0,
            single: vec![0.0; space.singles.len()],
            pair: vec![0.0; if space.mode == Mode::Asd { space.grid - 1 } else { 0 }],
            occupancy: vec![0.0; 2 * space.l],
            num: vec![0.0; space.l],
        }
    }

    fn add(&mut self, o: &Accum) {
        self.loglik += o.loglik;
        for (a, b) in self
            .single
            .iter_mut()
            .chain(self.pair.iter_mut())
            .chain(self.occupancy.iter_mut())
            .chain(self.num.iter_mut())
            .zip(o.single.iter().chain(&o.pair).chain(&o.occupancy).chain(&o.num))
        {
            *a += b;
        }
    }

    pub fn prior_weights(&self) -> PriorWeights {
        PriorWeights {
            single: self.single.clone(),
            pair: self.pair.clone(),
        }
    }
}

/// Per-segment scorer for fixed `(x, priors)`.
struct Scorer<'a> {
    space: &'a ConfigSpace,
    x: &'a [f64],
    log_prior: Vec<f64>,
    /// `‖T_k‖²` per single configuration.
    energy: Vec<f64>,
    inv_two_var: f64,
    log_norm: f64,
}

impl<'a> Scorer<'a> {
    fn new(space: &'a ConfigSpace, x: &'a [f64], priors: &EmPriors, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(MtdError::invalid("EM requires a positive noise level"));
        }
        let l = space.l;
        let energy = space
            .singles
            .iter()
            .map(|&f| template_range(f, l).map(|i| x[i + f - l].powi(2)).sum())
            .collect();
        Ok(Scorer {
            space,
            x,
            log_prior: space.log_priors(priors)?,
            energy,
            inv_two_var: 1.0 / (2.0 * sigma * sigma),
            log_norm: -(l as f64) / 2.0 * (2.0 * PI * sigma * sigma).ln(),
        })
    }

    /// Writes normalized posteriors into `post` and returns the segment log-likelihood.
    fn score(&self, y: &[f64], post: &mut [f64]) -> f64 {
        let l = self.space.l;
        let ns = self.space.singles.len();
        let mut corr = vec![0.0; ns];
        for (k, &f) in self.space.singles.iter().enumerate() {
            corr[k] = template_range(f, l).map(|i| y[i] * self.x[i + f - l]).sum();
        }
        for k in 0..ns {
            post[k] = (2.0 * corr[k] - self.energy[k]) * self.inv_two_var + self.log_prior[k];
        }
        for (p, &(k1, k2)) in self.space.pairs.iter().enumerate() {
            post[ns + p] = (2.0 * (corr[k1] + corr[k2]) - self.energy[k1] - self.energy[k2]) * self.inv_two_var
                + self.log_prior[ns + p];
        }
        let max = post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in post.iter_mut() {
            let e = *v - max;
            *v = if e < -745.0 { 0.0 } else { e.exp() };
            sum += *v;
        }
        post.iter_mut().for_each(|v| *v /= sum);
        let yy: f64 = y.iter().map(|v| v * v).sum();
        max + sum.ln() - yy * self.inv_two_var + self.log_norm
    }
}

/// Indices `i` of the window where the template for fine shift `f` is nonzero.
fn template_range(f: usize, l: usize) -> std::ops::Range<usize> {
    l.saturating_sub(f)..(2 * l).saturating_sub(f).min(l)
}

fn check_inputs(segments: &SegmentSet, x: &Signal) -> Result<()> {
    if x.len() != segments.signal_len() {
        return Err(MtdError::invalid("signal length does not match the segments"));
    }
    Ok(())
}

/// Posterior over configurations for every segment.
pub fn e_step(segments: &SegmentSet, x: &Signal, priors: &EmPriors) -> Result<PosteriorTable> {
    check_inputs(segments, x)?;
    let space = ConfigSpace::for_priors(x.len(), priors)?;
    let scorer = Scorer::new(&space, x.values(), priors, segments.sigma())?;
    let k = space.len();
    let mut rows = vec![0.0; segments.len() * k];
    rows.par_chunks_mut(k * SEGMENT_CHUNK)
        .enumerate()
        .for_each(|(c, block)| {
            for (i, row) in block.chunks_mut(k).enumerate() {
                scorer.score(segments.segment(c * SEGMENT_CHUNK + i), row);
            }
        });
    Ok(PosteriorTable { space, rows })
}

/// `Σ_m log Σ_c p(y_m | c, x) prior(c)`.
pub fn log_likelihood(segments: &SegmentSet, x: &Signal, priors: &EmPriors) -> Result<f64> {
    check_inputs(segments, x)?;
    let space = ConfigSpace::for_priors(x.len(), priors)?;
    Ok(accumulate(segments, x.values(), priors, &space)?.loglik)
}

/// One E-step folded directly into the M-step accumulators.
pub(crate) fn accumulate(segments: &SegmentSet, x: &[f64], priors: &EmPriors, space: &ConfigSpace) -> Result<Accum> {
    let scorer = Scorer::new(space, x, priors, segments.sigma())?;
    let l = space.l;
    let ns = space.singles.len();
    let n_d = segments.len();
    let parts: Vec<Accum> = (0..n_d.div_ceil(SEGMENT_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = Accum::zeros(space);
            let mut post = vec![0.0; space.len()];
            let mut occ = vec![0.0; 2 * l];
            for m in c * SEGMENT_CHUNK..((c + 1) * SEGMENT_CHUNK).min(n_d) {
                let y = segments.segment(m);
                acc.loglik += scorer.score(y, &mut post);
                occ.iter_mut().for_each(|o| *o = 0.0);
                for (k, &p) in post[..ns].iter().enumerate() {
                    acc.single[k] += p;
                    occ[space.singles[k]] += p;
                }
                for (i, &p) in post[ns..].iter().enumerate() {
                    let (k1, k2) = space.pairs[i];
                    acc.pair[space.pair_gap(i)] += p;
                    occ[space.singles[k1]] += p;
                    occ[space.singles[k2]] += p;
                }
                add_occupancy(y, &occ, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = Accum::zeros(space);
    for p in &parts {
        total.add(p);
    }
    Ok(total)
}

fn add_occupancy(y: &[f64], occ: &[f64], acc: &mut Accum) {
    let l = y.len();
    for (r, &w) in occ.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        acc.occupancy[r] += w;
        // x[j] sits at y[j + L - r] for j in max(0, r-L) .. min(L, r).
        for j in r.saturating_sub(l)..r.min(l) {
            acc.num[j] += w * y[j + l - r];
        }
    }
}

pub(crate) fn signal_from_accum(acc: &Accum) -> Result<Signal> {
    let l = acc.num.len();
    let x = (0..l)
        .map(|j| {
            let den: f64 = acc.occupancy[j + 1..=j + l].iter().sum();
            if den > 0.0 {
                Ok(acc.num[j] / den)
            } else {
                Err(MtdError::ZeroDenominator { coord: j })
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    Signal::new(x)
}

/// Closed-form signal update: the posterior-weighted average of the segment
/// samples each signal entry is aligned with.
pub fn m_step_signal(segments: &SegmentSet, posteriors: &PosteriorTable) -> Result<Signal> {
    let space = &posteriors.space;
    if segments.len() != posteriors.num_segments() || segments.signal_len() != space.l {
        return Err(MtdError::invalid("posterior table does not match the segments"));
    }
    let ns = space.singles.len();
    let mut acc = Accum::zeros(space);
    let mut occ = vec![0.0; 2 * space.l];
    for m in 0..segments.len() {
        let r = posteriors.row(m);
        occ.iter_mut().for_each(|o| *o = 0.0);
        for (k, &p) in r[..ns].iter().enumerate() {
            occ[space.singles[k]] += p;
        }
        for (i, &p) in r[ns..].iter().enumerate() {
            let (k1, k2) = space.pairs[i];
            occ[space.singles[k1]] += p;
            occ[space.singles[k2]] += p;
        }
        add_occupancy(segments.segment(m), &occ, &mut acc);
    }
    signal_from_accum(&acc)
}

/// Posterior-average update of the well-separated priors.
pub fn m_step_prior_ws(posteriors: &PosteriorTable) -> Result<EmPriors> {
    super::priors::update_ws(&posteriors.weights())
}

/// Frank-Wolfe update of `(α0, α1, ρ1)` starting from `start`.
pub fn m_step_prior_asd(
    posteriors: &PosteriorTable,
    start: &EmPriors,
    tol: f64,
    max_iter: usize,
) -> Result<(EmPriors, super::priors::FwDiagnostics)> {
    if posteriors.space.mode != Mode::Asd {
        return Err(MtdError::invalid("arbitrary-spacing update needs an arbitrary-spacing table"));
    }
    super::priors::update_asd(&posteriors.weights(), start, tol, max_iter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::em::segments::shift_template;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn random_segments(l: usize, n_d: usize, sigma: f64, seed: u64) -> SegmentSet {
        let mut rng = rng_from_seed(seed);
        SegmentSet::from_flat((0..l * n_d).map(|_| rng.gen_range(-2.0..2.0)).collect(), l, sigma).unwrap()
    }

    fn random_table(space: ConfigSpace, n_d: usize, seed: u64) -> PosteriorTable {
        let mut rng = rng_from_seed(seed);
        let mut rows = Vec::new();
        for _ in 0..n_d {
            let r: Vec<f64> = (0..space.len()).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = r.iter().sum();
            rows.extend(r.iter().map(|v| v / s));
        }
        PosteriorTable::new(space, rows).unwrap()
    }

    #[test]
    fn config_counts() {
        let s = ConfigSpace::full(10, Mode::Asd);
        assert_eq!(s.singles.len(), 20);
        assert_eq!(s.pairs.len(), 45);
        let s = ConfigSpace::new(10, Resolution::for_em(10, 2).unwrap(), Mode::Asd);
        assert_eq!(s.grid, 4);
        assert_eq!(s.singles, vec![0, 3, 5, 8, 10, 13, 15, 18]);
        for &(k1, k2) in &s.pairs {
            let (f1, f2) = (s.singles[k1], s.singles[k2]);
            assert!(f1 > 10 && f1 < 20 && f2 > 0 && f2 <= f1 - 10);
        }
    }

    #[test]
    fn rows_sum_to_one() {
        let segs = random_segments(10, 300, 0.3, 1);
        let mut rng = rng_from_seed(2);
        let x = Signal::random_normalized(10, &mut rng);
        for priors in [EmPriors::uniform_ws(10), EmPriors::uniform_asd(10), EmPriors::uniform_asd(4)] {
            let t = e_step(&segs, &x, &priors).unwrap();
            for m in 0..t.num_segments() {
                assert!((t.row(m).iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn flat_likelihood_returns_priors() {
        let segs = random_segments(5, 20, 1e6, 3);
        let x = Signal::bundled().values()[..5].to_vec();
        let x = Signal::new(x).unwrap();
        let p = EmPriors::uniform_asd(5);
        let t = e_step(&segs, &x, &p).unwrap();
        let space = &t.space;
        for m in 0..t.num_segments() {
            let r = t.row(m);
            for (k, &v) in r[..space.singles.len()].iter().enumerate() {
                assert!((v - p.single(k)).abs() < 1e-6);
            }
            for (i, &(k1, k2)) in space.pairs.iter().enumerate() {
                assert!((r[space.singles.len() + i] - p.pair(k1, k2)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn exact_segment_is_identified() {
        let x = Signal::bundled();
        let y = shift_template(&x, 10).unwrap();
        let segs = SegmentSet::from_flat(y, 10, 0.01).unwrap();
        let t = e_step(&segs, &x, &EmPriors::uniform_ws(10)).unwrap();
        assert!(t.row(0)[10] > 0.999);
    }

    #[test]
    fn loglik_of_exact_segment_is_normalizer() {
        let x = Signal::bundled();
        let segs = SegmentSet::from_flat(shift_template(&x, 10).unwrap(), 10, 0.5).unwrap();
        let mut alpha = vec![0.0; 20];
        alpha[10] = 1.0;
        let ll = log_likelihood(&segs, &x, &EmPriors::ws(alpha).unwrap()).unwrap();
        let want = -5.0 * (2.0 * PI * 0.25).ln();
        assert!((ll - want).abs() < 1e-12);
    }

    #[test]
    fn loglik_is_additive_over_segments() {
        let segs = random_segments(4, 6, 0.8, 4);
        let x = Signal::new(vec![0.5, -1.0, 1.5, 0.2]).unwrap();
        let p = EmPriors::uniform_asd(4);
        let total = log_likelihood(&segs, &x, &p).unwrap();
        let parts: f64 = (0..6)
            .map(|m| {
                let s = SegmentSet::from_flat(segs.segment(m).to_vec(), 4, 0.8).unwrap();
                log_likelihood(&s, &x, &p).unwrap()
            })
            .sum();
        assert!((total - parts).abs() < 1e-10);
        let extra = SegmentSet::from_flat(segs.flat()[..20].to_vec(), 4, 0.8).unwrap();
        assert!(log_likelihood(&extra, &x, &p).unwrap() < log_likelihood(&SegmentSet::from_flat(segs.flat()[..16].to_vec(), 4, 0.8).unwrap(), &x, &p).unwrap());
    }

    #[test]
    fn loglik_matches_naive_arithmetic() {
        let l = 3;
        let sigma = 1.3;
        let segs = random_segments(l, 5, sigma, 5);
        let x = Signal::new(vec![0.7, -0.4, 1.1]).unwrap();
        let c = super::super::priors::constraint_weights(3);
        let t = [0.3, 0.05, 0.2, 0.1];
        let s: f64 = t.iter().zip(&c).map(|(a, b)| a * b).sum();
        let p = EmPriors::asd(t[0] / s, t[1] / s, vec![t[2] / s, t[3] / s]).unwrap();
        let space = ConfigSpace::full(l, Mode::Asd);
        let gauss = |y: &[f64], tmpl: &[f64]| -> f64 {
            y.iter()
                .zip(tmpl)
                .map(|(a, b)| (-(a - b).powi(2) / (2.0 * sigma * sigma)).exp() / (2.0 * PI * sigma * sigma).sqrt())
                .product()
        };
        let mut naive = 0.0;
        for m in 0..5 {
            let y = segs.segment(m);
            let mut mix = 0.0;
            for k in 0..2 * l {
                mix += p.single(k) * gauss(y, &shift_template(&x, k).unwrap());
            }
            for &(k1, k2) in &space.pairs {
                let a = shift_template(&x, k1).unwrap();
                let b = shift_template(&x, k2).unwrap();
                let sum: Vec<f64> = a.iter().zip(&b).map(|(u, v)| u + v).collect();
                mix += p.pair(k1, k2) * gauss(y, &sum);
            }
            naive += mix.ln();
        }
        let ll = log_likelihood(&segs, &x, &p).unwrap();
        assert!((ll - naive).abs() < 1e-10, "{ll} vs {naive}");
    }

    #[test]
    fn concentrated_posteriors_average_segments() {
        let segs = random_segments(4, 5, 1.0, 6);
        let space = ConfigSpace::full(4, Mode::Ws);
        let mut rows = Vec::new();
        for _ in 0..5 {
            let mut r = vec![0.0; 8];
            r[4] = 1.0;
            rows.extend(r);
        }
        let x = m_step_signal(&segs, &PosteriorTable::new(space, rows).unwrap()).unwrap();
        for j in 0..4 {
            let mean = (0..5).map(|m| segs.segment(m)[j]).sum::<f64>() / 5.0;
            assert!((x.values()[j] - mean).abs() < 1e-15);
        }
    }

    #[test]
    fn zero_mass_coordinate_is_reported() {
        let segs = random_segments(3, 2, 1.0, 7);
        let space = ConfigSpace::full(3, Mode::Ws);
        let mut rows = vec![0.0; 12];
        rows[0] = 1.0;
        rows[6] = 1.0;
        let err = m_step_signal(&segs, &PosteriorTable::new(space, rows).unwrap()).unwrap_err();
        assert!(matches!(err, MtdError::ZeroDenominator { coord: 0 }));
    }

    #[test]
    fn asd_update_without_pairs_equals_ws_update() {
        let segs = random_segments(5, 5, 1.0, 8);
        let ws = random_table(ConfigSpace::full(5, Mode::Ws), 5, 9);
        let asd_space = ConfigSpace::full(5, Mode::Asd);
        let mut rows = Vec::new();
        for m in 0..5 {
            rows.extend(ws.row(m));
            rows.extend(vec![0.0; asd_space.pairs.len()]);
        }
        let asd = PosteriorTable::new(asd_space, rows).unwrap();
        assert_eq!(m_step_signal(&segs, &ws).unwrap(), m_step_signal(&segs, &asd).unwrap());
    }

    #[test]
    fn asd_priors_without_rho1_reproduce_ws_posteriors() {
        let segs = random_segments(5, 40, 0.7, 10);
        let x = Signal::new(vec![1.0, -0.5, 0.3, 0.8, -1.2]).unwrap();
        let (a0, a1) = (0.28, 0.08);
        let mut alpha = vec![a1; 10];
        alpha[0] = a0;
        let ws = e_step(&segs, &x, &EmPriors::ws(alpha).unwrap()).unwrap();
        let asd = e_step(&segs, &x, &EmPriors::asd(a0, a1, vec![0.0; 4]).unwrap()).unwrap();
        for m in 0..40 {
            let (a, b) = (ws.row(m), asd.row(m));
            for k in 0..10 {
                assert!((a[k] - b[k]).abs() < 1e-15);
            }
            assert!(b[10..].iter().all(|&v| v == 0.0));
        }
        assert_eq!(m_step_signal(&segs, &ws).unwrap(), m_step_signal(&segs, &asd).unwrap());
    }

    /// Gradient ascent on `Q(x) = -Σ_m Σ_c p_mc ‖y_m - T_c x‖² / 2σ²`.
    fn numeric_q_max(segs: &SegmentSet, t: &PosteriorTable) -> Vec<f64> {
        let l = segs.signal_len();
        let space = &t.space;
        let ns = space.singles.len();
        let template = |x: &[f64], k: usize| shift_template(&Signal::new(x.to_vec()).unwrap(), space.singles[k]).unwrap();
        let grad = |x: &[f64]| -> Vec<f64> {
            let mut g = vec![0.0; l];
            for m in 0..segs.len() {
                let y = segs.segment(m);
                let r = t.row(m);
                for c in 0..space.len() {
                    let tm = if c < ns {
                        template(x, c)
                    } else {
                        let (k1, k2) = space.pairs[c - ns];
                        template(x, k1).iter().zip(template(x, k2)).map(|(a, b)| a + b).collect()
                    };
                    // d/dx[j] of -‖y - T x‖²/2 is (y - T x) at the aligned index.
                    let shifts: Vec<usize> = if c < ns {
                        vec![space.singles[c]]
                    } else {
                        let (k1, k2) = space.pairs[c - ns];
                        vec![space.singles[k1], space.singles[k2]]
                    };
                    for f in shifts {
                        for i in template_range(f, l) {
                            g[i + f - l] += r[c] * (y[i] - tm[i]);
                        }
                    }
                }
            }
            g
        };
        let mut x = vec![0.0; l];
        for _ in 0..20_000 {
            let g = grad(&x);
            let norm = g.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if norm < 1e-12 {
                break;
            }
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi += 0.05 * gi;
            }
        }
        x
    }

    #[test]
    fn signal_update_maximizes_q() {
        for (mode, seed) in [(Mode::Ws, 11), (Mode::Asd, 12)] {
            let segs = random_segments(3, 5, 1.0, seed);
            let t = random_table(ConfigSpace::full(3, mode), 5, seed + 100);
            let closed = m_step_signal(&segs, &t).unwrap();
            let numeric = numeric_q_max(&segs, &t);
            for (a, b) in closed.values().iter().zip(&numeric) {
                assert!((a - b).abs() < 1e-6, "{mode}: {a} vs {b}");
            }
        }
    }
}
