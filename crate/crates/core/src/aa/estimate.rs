//! Multi-restart frequency-marching driver.

use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use crate::coarse::{coarsen_measurement_at, transfer_rho1};
use crate::error::{MtdError, Result};
use crate::grid::{aa_schedule, Resolution};
use crate::model::{Mode, Signal};
use crate::moments::MomentStats;
use crate::report::{EstimateReport, Method, StageSummary};
use crate::rng::{derive_seed, label, rng_from_seed};

use super::cost::Objective;
use super::fourier::{Basis, FourierParams};
use super::optim::{minimize, MinimizeOptions};

#[derive(Debug, Clone, PartialEq)]
pub struct AaConfig {
    pub restarts: usize,
    /// Run the coarse Fourier stages before the signal-space refinement.
    pub marching: bool,
    pub grad_tol: f64,
    pub max_iter: usize,
    /// Lower bound for `ρ0` and `ρ1`.
    pub rho_floor: f64,
}

impl Default for AaConfig {
    fn default() -> Self {
        AaConfig {
            restarts: 10,
            marching: true,
            grad_tol: 1e-8,
            max_iter: 500,
            rho_floor: 0.0,
        }
    }
}

struct RestartOutcome {
    x: Vec<f64>,
    rho0: f64,
    rho1: Vec<f64>,
    cost: f64,
    stages: Vec<StageSummary>,
}

/// Fits `(x, ρ0, ρ1)` to measured autocorrelations.
pub fn estimate_aa(stats: &MomentStats, mode: Mode, cfg: &AaConfig, seed: u64) -> Result<EstimateReport> {
    if cfg.restarts == 0 {
        return Err(MtdError::invalid("restarts must be at least 1"));
    }
    if stats.l < 2 {
        return Err(MtdError::invalid("signal length must be at least 2"));
    }
    let start = Instant::now();
    let outcomes: Vec<Result<RestartOutcome>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(stats, mode, cfg, derive_seed(seed, &[label("aa"), r as u64])))
        .collect();

    let objectives: Vec<Option<f64>> = outcomes.iter().map(|o| o.as_ref().ok().map(|o| o.cost)).collect();
    let best = objectives
        .iter()
        .enumerate()
        .filter_map(|(i, c)| c.map(|c| (i, c)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i);
    let Some(best) = best else {
        let last = outcomes
            .into_iter()
            .rev()
            .find_map(|o| o.err())
            .map(|e| e.to_string())
            .unwrap_or_default();
        return Err(MtdError::AllRestartsFailed {
            restarts: cfg.restarts,
            last,
        });
    };
    let o = outcomes.into_iter().nth(best).expect("index in range").expect("selected restart succeeded");
    Ok(EstimateReport {
        method: Method::Aa,
        mode,
        x_hat: Signal::new(o.x)?,
        rho0_hat: o.rho0,
        rho1_hat: o.rho1,
        final_cost: Some(o.cost),
        log_likelihood: None,
        stages: o.stages,
        restart: best,
        restart_objectives: objectives,
        priors: None,
        trace: Vec::new(),
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn run_restart(stats: &MomentStats, mode: Mode, cfg: &AaConfig, seed: u64) -> Result<RestartOutcome> {
    let l = stats.l;
    let asd = mode == Mode::Asd;
    let mut rng = rng_from_seed(seed);
    let mut x = Signal::random_normalized(l, &mut rng).into_values();
    let mut rho0: f64 = rng.gen_range(0.1..0.9);
    let mut rho1 = if asd {
        let u: Vec<f64> = (0..l - 1).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = u.iter().sum();
        u.iter().map(|v| v / total * rho0 / 2.0).collect()
    } else {
        Vec::new()
    };
    let opts = MinimizeOptions {
        grad_tol: cfg.grad_tol,
        max_iter: cfg.max_iter,
    };
    let mut stages = Vec::new();

    if cfg.marching {
        for (n, res) in aa_schedule(l) {
            let cstats = coarsen_measurement_at(stats, res, n)?;
            let obj = Objective::coarse(&cstats, asd);
            let basis = Basis::new(l, n);
            let k = 2 * n + 1;
            let mut p = FourierParams::project(&x, n).to_vec();
            p.push(rho0);
            if asd {
                p.extend(transfer_rho1(&rho1, Resolution::FULL, res, l));
            }
            let mut lower = vec![f64::NEG_INFINITY; k];
            lower.resize(p.len(), cfg.rho_floor);
            let r = minimize(
                |v| {
                    let e = obj.eval(&basis.apply(&v[..k]), v[k], &v[k + 1..]);
                    let mut g = basis.adjoint(&e.grad_x);
                    g.push(e.grad_rho0);
                    g.extend(e.grad_rho1);
                    (e.value, g)
                },
                &p,
                &lower,
                opts,
            )?;
            x = basis.apply(&r.x[..k]);
            rho0 = r.x[k];
            if asd {
                rho1 = transfer_rho1(&r.x[k + 1..], res, Resolution::FULL, l);
            }
            stages.push(StageSummary {
                n_max: Some(n),
                delta_x: res.as_f64(),
                objective: r.value,
                iterations: r.iterations,
            });
        }
    }

    let obj = Objective::full(stats, asd);
    let mut p = x.clone();
    p.push(rho0);
    p.extend(&rho1);
    let mut lower = vec![f64::NEG_INFINITY; l];
    lower.resize(p.len(), cfg.rho_floor);
    let r = minimize(
        |v| {
            let e = obj.eval(&v[..l], v[l], &v[l + 1..]);
            let mut g = e.grad_x;
            g.push(e.grad_rho0);
            g.extend(e.grad_rho1);
            (e.value, g)
        },
        &p,
        &lower,
        opts,
    )?;
    stages.push(StageSummary {
        n_max: None,
        delta_x: 1.0,
        objective: r.value,
        iterations: r.iterations,
    });
    Ok(RestartOutcome {
        x: r.x[..l].to_vec(),
        rho0: r.x[l],
        rho1: r.x[l + 1..].to_vec(),
        cost: r.value,
        stages,
    })
}
