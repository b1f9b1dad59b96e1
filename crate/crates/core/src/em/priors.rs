//! Shift priors and their M-step updates.
//!
//! In the arbitrary-spacing model every prior entry is an affine function of
//! `θ = (α0, α1, ρ1[0..G-1])`, constrained to `c·θ = 1`, `θ >= 0`.

use serde::{Deserialize, Serialize};

use crate::error::{MtdError, Result};

/// Tolerance for the normalization constraint.
pub const CONSTRAINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum EmPriors {
    /// `alpha[l]` over shifts `0..2G`.
    Ws { alpha: Vec<f64> },
    Asd {
        alpha0: f64,
        alpha1: f64,
        /// Length `G-1`.
        rho1: Vec<f64>,
    },
}

/// `c` in `c·θ = 1` for grid length `g`.
pub(crate) fn constraint_weights(g: usize) -> Vec<f64> {
    let mut c = vec![1.0, (2 * g - 1) as f64];
    c.extend((0..g - 1).map(|i| (i + g) as f64 / g as f64));
    c
}

impl EmPriors {
    pub fn ws(alpha: Vec<f64>) -> Result<Self> {
        if alpha.len() < 2 || alpha.len() % 2 != 0 {
            return Err(MtdError::invalid("alpha must have even length 2G"));
        }
        if alpha.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(MtdError::invalid("alpha entries must be finite and >= 0"));
        }
        let total: f64 = alpha.iter().sum();
        if (total - 1.0).abs() > CONSTRAINT_TOL {
            return Err(MtdError::invalid(format!("alpha sums to {total}, expected 1")));
        }
        Ok(EmPriors::Ws { alpha })
    }

    pub fn asd(alpha0: f64, alpha1: f64, rho1: Vec<f64>) -> Result<Self> {
        let p = EmPriors::Asd { alpha0, alpha1, rho1 };
        let theta = p.theta();
        if theta.iter().any(|t| !(*t >= 0.0) || !t.is_finite()) {
            return Err(MtdError::invalid("prior parameters must be finite and >= 0"));
        }
        let total: f64 = theta.iter().zip(constraint_weights(p.grid_len())).map(|(t, c)| t * c).sum();
        if (total - 1.0).abs() > CONSTRAINT_TOL {
            return Err(MtdError::invalid(format!(
                "normalization constraint gives {total}, expected 1"
            )));
        }
        Ok(p)
    }

    pub fn uniform_ws(g: usize) -> Self {
        EmPriors::Ws {
            alpha: vec![1.0 / (2 * g) as f64; 2 * g],
        }
    }

    /// Constraint mass split evenly between `α0`, the `α1` block and the `ρ1` block.
    pub fn uniform_asd(g: usize) -> Self {
        if g == 1 {
            return EmPriors::Asd {
                alpha0: 0.5,
                alpha1: 0.5,
                rho1: vec![],
            };
        }
        let c = constraint_weights(g);
        let block: f64 = c[2..].iter().sum();
        EmPriors::Asd {
            alpha0: 1.0 / 3.0,
            alpha1: 1.0 / (3.0 * c[1]),
            rho1: vec![1.0 / (3.0 * block); g - 1],
        }
    }

    pub fn is_asd(&self) -> bool {
        matches!(self, EmPriors::Asd { .. })
    }

    pub fn grid_len(&self) -> usize {
        match self {
            EmPriors::Ws { alpha } => alpha.len() / 2,
            EmPriors::Asd { rho1, .. } => rho1.len() + 1,
        }
    }

    pub(crate) fn theta(&self) -> Vec<f64> {
        match self {
            EmPriors::Ws { .. } => unreachable!("θ is defined for the arbitrary-spacing priors only"),
            EmPriors::Asd { alpha0, alpha1, rho1 } => {
                let mut t = vec![*alpha0, *alpha1];
                t.extend(rho1);
                t
            }
        }
    }

    pub(crate) fn from_theta(theta: &[f64]) -> Self {
        EmPriors::Asd {
            alpha0: theta[0],
            alpha1: theta[1],
            rho1: theta[2..].to_vec(),
        }
    }

    /// Prior of a single configuration with coarse shift `k`, `0 <= k < 2G`.
    pub fn single(&self, k: usize) -> f64 {
        match self {
            EmPriors::Ws { alpha } => alpha[k],
            EmPriors::Asd { alpha0, alpha1, rho1 } => {
                let g = rho1.len() + 1;
                if k == 0 {
                    return *alpha0;
                }
                let k = k.min(2 * g - k);
                // Gaps j in [2G-k, 2G-2], i.e. rho1 indices G-k ..= G-2.
                alpha1 + rho1[g - k..].iter().sum::<f64>() / g as f64
            }
        }
    }

    /// Prior of a two-occurrence configuration `(k1, k2)`, `G < k1 < 2G`, `0 < k2 <= k1-G`.
    pub fn pair(&self, k1: usize, k2: usize) -> f64 {
        match self {
            EmPriors::Ws { .. } => 0.0,
            EmPriors::Asd { rho1, .. } => {
                let g = rho1.len() + 1;
                rho1[k1 - k2 - g] / g as f64
            }
        }
    }

    /// Occurrence density implied by the priors, in units of the grid.
    pub fn implied_rho0(&self) -> f64 {
        match self {
            EmPriors::Ws { alpha } => {
                let g = alpha.len() / 2;
                (1.0 - alpha[0]) * g as f64 / (2 * g - 1) as f64
            }
            EmPriors::Asd { alpha1, rho1, .. } => {
                (rho1.len() + 1) as f64 * alpha1 + rho1.iter().sum::<f64>()
            }
        }
    }
}

/// Posterior mass aggregated over configurations that share a prior entry.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorWeights {
    /// Per single shift `0..2G`.
    pub single: Vec<f64>,
    /// Per pair gap index `k1 - k2 - G`, `0..G-1` (empty for well-separated spaces).
    pub pair: Vec<f64>,
}

/// Closed-form update for the well-separated priors: posterior averages.
pub fn update_ws(w: &PriorWeights) -> Result<EmPriors> {
    let total: f64 = w.single.iter().sum::<f64>() + w.pair.iter().sum::<f64>();
    if !(total > 0.0) {
        return Err(MtdError::invalid("posterior weights have zero total"));
    }
    let mut alpha: Vec<f64> = w.single.iter().map(|v| v / total).collect();
    let s: f64 = alpha.iter().sum();
    alpha.iter_mut().for_each(|a| *a /= s);
    Ok(EmPriors::Ws { alpha })
}

/// Outcome of the constrained prior update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FwDiagnostics {
    pub iterations: usize,
    pub gap: f64,
    pub converged: bool,
}

/// `(weight, sparse coefficient vector)` terms of `Σ W log(a·θ)`.
fn objective_terms(w: &PriorWeights, g: usize) -> Vec<(f64, Vec<(usize, f64)>)> {
    let gf = g as f64;
    let mut terms = Vec::new();
    if w.single[0] > 0.0 {
        terms.push((w.single[0], vec![(0, 1.0)]));
    }
    for k in 1..=g {
        let weight = w.single[k] + if k < g { w.single[2 * g - k] } else { 0.0 };
        if weight > 0.0 {
            let mut a = vec![(1, 1.0)];
            a.extend((g - k..g - 1).map(|i| (2 + i, 1.0 / gf)));
            terms.push((weight, a));
        }
    }
    for (i, &weight) in w.pair.iter().enumerate() {
        if weight > 0.0 {
            terms.push((weight, vec![(2 + i, 1.0 / gf)]));
        }
    }
    terms
}

fn affine(a: &[(usize, f64)], theta: &[f64]) -> f64 {
    a.iter().map(|&(j, c)| c * theta[j]).sum()
}

/// Maximizes `Σ W log(prior)` over the arbitrary-spacing polytope by
/// Frank-Wolfe with away steps and exact line search, starting at `start`.
pub fn update_asd(
    w: &PriorWeights,
    start: &EmPriors,
    tol: f64,
    max_iter: usize,
) -> Result<(EmPriors, FwDiagnostics)> {
    let g = start.grid_len();
    if w.single.len() != 2 * g || w.pair.len() != g - 1 {
        return Err(MtdError::invalid("posterior weights do not match the prior grid"));
    }
    let total: f64 = w.single.iter().sum::<f64>() + w.pair.iter().sum::<f64>();
    if !(total > 0.0) {
        return Err(MtdError::invalid("posterior weights have zero total"));
    }
    let terms: Vec<(f64, Vec<(usize, f64)>)> = objective_terms(w, g)
        .into_iter()
        .map(|(wt, a)| (wt / total, a))
        .collect();
    let c = constraint_weights(g);
    let dim = c.len();
    let mut theta = start.theta();
    // A start outside the support of the weights would have value -∞.
    if terms.iter().any(|(_, a)| affine(a, &theta) <= 0.0) {
        theta = EmPriors::uniform_asd(g).theta();
    }

    let mut gap = f64::INFINITY;
    let mut iterations = 0;
    while iterations < max_iter {
        let mut grad = vec![0.0; dim];
        for (wt, a) in &terms {
            let v = affine(a, &theta);
            for &(j, cj) in a {
                grad[j] += wt * cj / v;
            }
        }
        let ratio: Vec<f64> = grad.iter().zip(&c).map(|(g, c)| g / c).collect();
        let dot: f64 = grad.iter().zip(&theta).map(|(g, t)| g * t).sum();
        let fw = (0..dim).max_by(|&a, &b| ratio[a].total_cmp(&ratio[b]).then(b.cmp(&a))).expect("dim > 0");
        gap = ratio[fw] - dot;
        if gap <= tol {
            break;
        }
        let away = (0..dim)
            .filter(|&j| theta[j] > 0.0)
            .min_by(|&a, &b| ratio[a].total_cmp(&ratio[b]).then(a.cmp(&b)));
        let away_gap = away.map(|j| dot - ratio[j]).unwrap_or(0.0);

        let (dir, gmax): (Vec<f64>, f64) = if gap >= away_gap {
            let mut d: Vec<f64> = theta.iter().map(|t| -t).collect();
            d[fw] += 1.0 / c[fw];
            (d, 1.0)
        } else {
            let j = away.expect("away vertex exists");
            let lam = c[j] * theta[j];
            let mut d = theta.clone();
            d[j] -= 1.0 / c[j];
            (d, if lam < 1.0 { lam / (1.0 - lam) } else { 1e12 })
        };

        let slope = |gamma: f64| -> f64 {
            terms
                .iter()
                .map(|(wt, a)| {
                    let ad = affine(a, &dir);
                    wt * ad / (affine(a, &theta) + gamma * ad)
                })
                .sum()
        };
        // A term that vanishes at the end of the segment makes the slope -∞ there.
        let vanishes = terms.iter().any(|(_, a)| {
            let v = affine(a, &theta);
            v + gmax * affine(a, &dir) <= 1e-12 * v
        });
        let step = if !vanishes && slope(gmax) >= 0.0 {
            gmax
        } else {
            let (mut lo, mut hi) = (0.0, gmax);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if slope(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            lo
        };
        for (t, d) in theta.iter_mut().zip(&dir) {
            *t = (*t + step * d).max(0.0);
        }
        iterations += 1;
    }

    let norm: f64 = theta.iter().zip(&c).map(|(t, c)| t * c).sum();
    theta.iter_mut().for_each(|t| *t /= norm);
    Ok((
        EmPriors::from_theta(&theta),
        FwDiagnostics {
            iterations,
            gap,
            converged: gap <= tol,
        },
    ))
}

/// `Σ W log(prior)` for the given weights.
pub fn prior_objective(w: &PriorWeights, p: &EmPriors) -> f64 {
    let g = p.grid_len();
    let mut v = 0.0;
    for (k, &wt) in w.single.iter().enumerate() {
        if wt > 0.0 {
            v += wt * p.single(k).ln();
        }
    }
    for (i, &wt) in w.pair.iter().enumerate() {
        if wt > 0.0 {
            v += wt * p.pair(i + g + 1, 1).ln();
        }
    }
    v
}
