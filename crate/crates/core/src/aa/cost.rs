//! Weighted least-squares fit of predicted to measured autocorrelations.

use crate::coarse::CoarseStats;
use crate::grid::Resolution;
use crate::model::{DensityParams, Signal};
use crate::moments::{tri_len, Coef, DenseMoments, ForwardModel, MomentStats};

use super::fourier::{Basis, FourierParams};

/// Residual targets, weights and forward model for one resolution.
#[derive(Debug, Clone)]
pub(crate) struct Objective {
    model: ForwardModel,
    /// Noise level entering the prediction; zero for bias-corrected coarse data.
    sigma: f64,
    t1: f64,
    t2: Vec<f64>,
    t3: Vec<f64>,
    w2: f64,
    w3: f64,
}

/// Value and gradients with respect to the signal samples, `ρ0` and `ρ1`.
#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub value: f64,
    pub grad_x: Vec<f64>,
    pub grad_rho0: f64,
    pub grad_rho1: Vec<f64>,
}

impl Objective {
    fn with_targets(model: ForwardModel, sigma: f64, t1: f64, t2: Vec<f64>, t3: Vec<f64>) -> Self {
        let g = model.grid as f64;
        Objective {
            model,
            sigma,
            t1,
            t2,
            t3,
            w2: 1.0 / g,
            w3: 2.0 / (g * (g + 1.0)),
        }
    }

    pub fn full(stats: &MomentStats, cross_terms: bool) -> Self {
        let model = ForwardModel::new(stats.l, Resolution::FULL, cross_terms);
        Self::with_targets(model, stats.sigma, stats.a1, stats.a2.clone(), stats.a3.clone())
    }

    pub fn coarse(cstats: &CoarseStats, cross_terms: bool) -> Self {
        let model = ForwardModel::new(cstats.l, cstats.resolution, cross_terms);
        Self::with_targets(model, 0.0, cstats.b1, cstats.b2.clone(), cstats.b3.clone())
    }

    pub fn grid(&self) -> usize {
        self.model.grid
    }

    pub fn eval(&self, x: &[f64], rho0: f64, rho1: &[f64]) -> Evaluation {
        let l = self.model.l;
        let m = DenseMoments::of(x);
        let s2 = self.sigma * self.sigma;
        let (p1, p2, p3) = self.model.predict(&m, rho0, rho1, self.sigma);

        let r1 = p1 - self.t1;
        let r2: Vec<f64> = p2.iter().zip(&self.t2).map(|(p, t)| p - t).collect();
        let r3: Vec<f64> = p3.iter().zip(&self.t3).map(|(p, t)| p - t).collect();
        let value = r1 * r1
            + self.w2 * r2.iter().map(|r| r * r).sum::<f64>()
            + self.w3 * r3.iter().map(|r| r * r).sum::<f64>();

        let mut grad_rho0 = 0.0;
        let mut grad_rho1 = vec![0.0; rho1.len()];
        let mut bump = |c: Coef, v: f64| match c {
            Coef::Rho0 => grad_rho0 += v,
            Coef::Rho1(i) => grad_rho1[i] += v,
        };

        // Adjoints on the signal moments.
        let u1 = 2.0 * r1;
        bump(Coef::Rho0, u1 * m.a1);
        let mut adj1 = u1 * rho0;
        let mut adj2 = vec![0.0; l];
        let mut adj3 = vec![0.0; l * l];
        for (terms, &r) in self.model.terms2.iter().zip(&r2) {
            let u = 2.0 * self.w2 * r;
            for &(c, p) in terms {
                bump(c, u * m.a2[p]);
                adj2[p] += u * ForwardModel::coef(c, rho0, rho1);
            }
        }
        for ((terms, &r), &d) in self.model.terms3.iter().zip(&r3).zip(&self.model.delta3) {
            let u = 2.0 * self.w3 * r;
            for &(c, p, q) in terms {
                bump(c, u * m.a3(p, q));
                adj3[p * l + q] += u * ForwardModel::coef(c, rho0, rho1);
            }
            if d != 0.0 {
                bump(Coef::Rho0, u * m.a1 * s2 * d);
                adj1 += u * rho0 * s2 * d;
            }
        }
        let mut grad_x = vec![0.0; l];
        DenseMoments::accumulate_gradient(x, adj1, &adj2, &adj3, &mut grad_x);
        debug_assert_eq!(r3.len(), tri_len(self.model.grid));
        Evaluation {
            value,
            grad_x,
            grad_rho0,
            grad_rho1,
        }
    }
}

/// Well-separated cost at `(x, ρ0)`; the gradient is ordered `[x.., ρ0]`.
pub fn cost_ws(x: &Signal, rho0: f64, stats: &MomentStats) -> (f64, Vec<f64>) {
    assert_eq!(x.len(), stats.l, "signal length must match the statistics");
    let e = Objective::full(stats, false).eval(x.values(), rho0, &[]);
    let mut g = e.grad_x;
    g.push(e.grad_rho0);
    (e.value, g)
}

/// Arbitrary-spacing cost; the gradient is ordered `[x.., ρ0, ρ1..]`.
pub fn cost_asd(x: &Signal, params: &DensityParams, stats: &MomentStats) -> (f64, Vec<f64>) {
    assert_eq!(x.len(), stats.l, "signal length must match the statistics");
    assert_eq!(params.rho1.len() + 1, stats.l, "rho1 must have length L-1");
    let e = Objective::full(stats, true).eval(x.values(), params.rho0, &params.rho1);
    let mut g = e.grad_x;
    g.push(e.grad_rho0);
    g.extend(e.grad_rho1);
    (e.value, g)
}

/// Coarse cost for the Fourier coefficients and coarse densities.
///
/// An empty `rho1` selects the well-separated model; otherwise it must have
/// length `L'-1`. The gradient is ordered `[c.., d.., ρ0, ρ1..]`.
pub fn coarse_cost(fp: &FourierParams, rho0: f64, rho1: &[f64], cstats: &CoarseStats) -> (f64, Vec<f64>) {
    assert_eq!(fp.n_max, cstats.n_max, "Fourier order must match the coarse stage");
    let obj = Objective::coarse(cstats, !rho1.is_empty());
    assert!(rho1.is_empty() || rho1.len() + 1 == obj.grid(), "coarse rho1 must have length L'-1");
    let basis = Basis::new(fp.l, fp.n_max);
    let e = obj.eval(&basis.apply(&fp.to_vec()), rho0, rho1);
    let mut g = basis.adjoint(&e.grad_x);
    g.push(e.grad_rho0);
    g.extend(e.grad_rho1);
    (e.value, g)
}
