//! Truncated real Fourier series for a length-`L` signal.

use std::f64::consts::PI;

use crate::error::{MtdError, Result};

/// `x[l] = c_0 + Σ_{n=1}^{n_max} c_n cos(2πnl/L) + d_n sin(2πnl/L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierParams {
    pub l: usize,
    pub n_max: usize,
    /// `c_0..=c_{n_max}`.
    pub c: Vec<f64>,
    /// `d_1..=d_{n_max}`.
    pub d: Vec<f64>,
}

impl FourierParams {
    pub fn new(l: usize, c: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        if c.is_empty() || d.len() + 1 != c.len() {
            return Err(MtdError::invalid(format!(
                "expected n_max+1 cosine and n_max sine coefficients, got {} and {}",
                c.len(),
                d.len()
            )));
        }
        if c.iter().chain(&d).any(|v| !v.is_finite()) {
            return Err(MtdError::invalid("Fourier coefficients must be finite"));
        }
        Ok(FourierParams {
            l,
            n_max: d.len(),
            c,
            d,
        })
    }

    pub fn zeros(l: usize, n_max: usize) -> Self {
        FourierParams {
            l,
            n_max,
            c: vec![0.0; n_max + 1],
            d: vec![0.0; n_max],
        }
    }

    pub fn num_params(&self) -> usize {
        2 * self.n_max + 1
    }

    /// Coefficients in the order `c_0..c_n, d_1..d_n`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.c.iter().chain(&self.d).copied().collect()
    }

    pub fn from_slice(l: usize, n_max: usize, v: &[f64]) -> Self {
        FourierParams {
            l,
            n_max,
            c: v[..=n_max].to_vec(),
            d: v[n_max + 1..2 * n_max + 1].to_vec(),
        }
    }

    pub fn synthesize(&self) -> Vec<f64> {
        let basis = Basis::new(self.l, self.n_max);
        basis.apply(&self.to_vec())
    }

    /// Least-squares projection of `x` onto the order-`n_max` series.
    pub fn project(x: &[f64], n_max: usize) -> Self {
        let l = x.len();
        let basis = Basis::new(l, n_max);
        let v = basis
            .cols
            .iter()
            .map(|col| {
                let nn: f64 = col.iter().map(|b| b * b).sum();
                if nn < 1e-12 {
                    0.0
                } else {
                    col.iter().zip(x).map(|(b, xi)| b * xi).sum::<f64>() / nn
                }
            })
            .collect::<Vec<_>>();
        Self::from_slice(l, n_max, &v)
    }
}

/// Columns of the synthesis matrix, in coefficient order.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    pub cols: Vec<Vec<f64>>,
}

impl Basis {
    pub fn new(l: usize, n_max: usize) -> Self {
        let lf = l as f64;
        let mut cols = vec![vec![1.0; l]];
        for n in 1..=n_max {
            cols.push((0..l).map(|i| (2.0 * PI * (n * i) as f64 / lf).cos()).collect());
        }
        for n in 1..=n_max {
            cols.push((0..l).map(|i| (2.0 * PI * (n * i) as f64 / lf).sin()).collect());
        }
        Basis { cols }
    }

    pub fn apply(&self, coef: &[f64]) -> Vec<f64> {
        let l = self.cols[0].len();
        let mut x = vec![0.0; l];
        for (col, &c) in self.cols.iter().zip(coef) {
            for (xi, b) in x.iter_mut().zip(col) {
                *xi += c * b;
            }
        }
        x
    }

    /// `Bᵀ g`.
    pub fn adjoint(&self, g: &[f64]) -> Vec<f64> {
        self.cols
            .iter()
            .map(|col| col.iter().zip(g).map(|(b, gi)| b * gi).sum())
            .collect()
    }
}
