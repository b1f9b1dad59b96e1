//! Bound-constrained quasi-Newton minimization.
//!
//! Projected BFGS: variables sitting on their lower bound with a gradient
//! pushing outward are frozen for the step, the remaining ones follow the
//! BFGS direction, and the trial point is projected back onto the bounds
//! before an Armijo backtracking test.

use crate::error::{MtdError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Stop when the projected gradient's max-norm falls to this value.
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            grad_tol: 1e-8,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinimizeResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub proj_grad_norm: f64,
    /// Objective at the start and after every accepted step.
    pub history: Vec<f64>,
}

fn proj_grad_norm(x: &[f64], g: &[f64], lower: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower)
        .map(|((&xi, &gi), &lo)| (xi - (xi - gi).max(lo)).abs())
        .fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `f` subject to `x >= lower` (use `f64::NEG_INFINITY` for free coordinates).
///
/// `f` returns the value and the gradient. The start point is clamped onto the bounds.
pub fn minimize<F>(mut f: F, x0: &[f64], lower: &[f64], opts: MinimizeOptions) -> Result<MinimizeResult>
where
    F: FnMut(&[f64]) -> (f64, Vec<f64>),
{
    let n = x0.len();
    assert_eq!(lower.len(), n, "one lower bound per coordinate");
    let mut x: Vec<f64> = x0.iter().zip(lower).map(|(&v, &lo)| v.max(lo)).collect();
    let (mut fx, mut g) = f(&x);
    if !fx.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(MtdError::NonFiniteCost);
    }
    let mut history = vec![fx];
    let mut h = identity(n);
    let mut fresh = true;
    let mut iterations = 0;
    let mut pg = proj_grad_norm(&x, &g, lower);

    while pg > opts.grad_tol && iterations < opts.max_iter {
        let free: Vec<bool> = (0..n).map(|i| !(x[i] <= lower[i] && g[i] > 0.0)).collect();
        let mut d = direction(&h, &g, &free);
        if dot(&g, &d) >= 0.0 && !fresh {
            h = identity(n);
            fresh = true;
            d = direction(&h, &g, &free);
        }
        let mut t = if fresh {
            1.0 / dot(&g, &g).sqrt().max(1.0)
        } else {
            1.0
        };

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..n).map(|i| (x[i] + t * d[i]).max(lower[i])).collect();
            let step: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &step);
            if decrease >= 0.0 {
                t *= 0.5;
                continue;
            }
            let (ft, gt) = f(&trial);
            if ft.is_finite() && gt.iter().all(|v| v.is_finite()) && ft <= fx + 1e-4 * decrease {
                accepted = Some((trial, ft, gt, step));
                break;
            }
            t *= 0.5;
        }

        let Some((xn, fnew, gn, s)) = accepted else {
            if fresh {
                break;
            }
            h = identity(n);
            fresh = true;
            continue;
        };
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                h = identity(n);
                h.iter_mut().enumerate().for_each(|(i, row)| row[i] = scale);
            }
            bfgs_update(&mut h, &s, &y, sy);
            fresh = false;
        }
        x = xn;
        fx = fnew;
        g = gn;
        history.push(fx);
        iterations += 1;
        pg = proj_grad_norm(&x, &g, lower);
    }

    Ok(MinimizeResult {
        converged: pg <= opts.grad_tol,
        x,
        value: fx,
        iterations,
        proj_grad_norm: pg,
        history,
    })
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect()
}

fn direction(h: &[Vec<f64>], g: &[f64], free: &[bool]) -> Vec<f64> {
    (0..g.len())
        .map(|i| {
            if !free[i] {
                return 0.0;
            }
            -h[i]
                .iter()
                .zip(g)
                .zip(free)
                .filter(|(_, &fr)| fr)
                .map(|((hij, gj), _)| hij * gj)
                .sum::<f64>()
        })
        .collect()
}

/// `H ← (I - ρ s yᵀ) H (I - ρ y sᵀ) + ρ s sᵀ`.
fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(a: [[f64; 3]; 3], b: [f64; 3]) -> impl Fn(&[f64]) -> (f64, Vec<f64>) {
        move |x: &[f64]| {
            let ax: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i][j] * x[j]).sum()).collect();
            let v = 0.5 * dot(x, &ax) - dot(&b, x);
            let g = (0..3).map(|i| ax[i] - b[i]).collect();
            (v, g)
        }
    }

    fn det3(m: [[f64; 3]; 3]) -> f64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    #[test]
    fn unconstrained_quadratic() {
        let a = [[4.0, 1.0, 0.0], [1.0, 3.0, 0.5], [0.0, 0.5, 2.0]];
        let b = [1.0, 2.0, 3.0];
        let r = minimize(quadratic(a, b), &[0.0; 3], &[f64::NEG_INFINITY; 3], MinimizeOptions::default())
            .unwrap();
        // Cramer's rule for A x = b.
        let d = det3(a);
        for k in 0..3 {
            let mut ak = a;
            for i in 0..3 {
                ak[i][k] = b[i];
            }
            assert!((r.x[k] - det3(ak) / d).abs() < 1e-8);
        }
        assert!(r.converged);
    }

    #[test]
    fn bound_clamped_kkt_point() {
        // min (x-(-2))² + (y-1)², x >= 0  →  (0, 1).
        let f = |x: &[f64]| {
            let v = (x[0] + 2.0).powi(2) + (x[1] - 1.0).powi(2);
            (v, vec![2.0 * (x[0] + 2.0), 2.0 * (x[1] - 1.0)])
        };
        let r = minimize(f, &[3.0, -4.0], &[0.0, f64::NEG_INFINITY], MinimizeOptions::default()).unwrap();
        assert_eq!(r.x[0], 0.0);
        assert!((r.x[1] - 1.0).abs() < 1e-8);
        assert!(r.converged);
    }

    #[test]
    fn stationary_start_is_returned() {
        let f = |x: &[f64]| (x[0] * x[0], vec![2.0 * x[0]]);
        let r = minimize(f, &[0.0], &[f64::NEG_INFINITY], MinimizeOptions::default()).unwrap();
        assert_eq!(r.x, vec![0.0]);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn non_finite_start_is_an_error() {
        let f = |_: &[f64]| (f64::NAN, vec![0.0]);
        assert!(matches!(
            minimize(f, &[1.0], &[0.0], MinimizeOptions::default()),
            Err(MtdError::NonFiniteCost)
        ));
    }

    #[test]
    fn rosenbrock_history_is_monotone() {
        let f = |x: &[f64]| {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            (v, vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)])
        };
        let r = minimize(f, &[-1.2, 1.0], &[f64::NEG_INFINITY; 2], MinimizeOptions::default()).unwrap();
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6);
    }
}
