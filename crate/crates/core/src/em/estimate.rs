//! Multi-restart EM with frequency marching.

use std::time::Instant;

use rayon::prelude::*;

use crate::coarse::{rebin_gaps, spread_rho1};
use crate::error::{MtdError, Result};
use crate::grid::{em_schedule, Resolution};
use crate::model::{Measurement, Mode, Signal};
use crate::report::{EstimateReport, Method, StageSummary, TraceRow};
use crate::rng::{derive_seed, label, rng_from_seed};

use super::estep::{accumulate, signal_from_accum, ConfigSpace};
use super::priors::{constraint_weights, update_asd, update_ws, EmPriors};
use super::segments::SegmentSet;

#[derive(Debug, Clone, PartialEq)]
pub struct EmConfig {
    pub restarts: usize,
    pub marching: bool,
    /// Stage ends when `‖x_{k+1} - x_k‖ / ‖x_k‖` drops below this.
    pub tol: f64,
    pub max_iter: usize,
    pub fw_tol: f64,
    pub fw_max_iter: usize,
    /// Smallest noise level used in the likelihood; noiseless data would
    /// otherwise give degenerate posteriors.
    pub sigma_floor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            restarts: 10,
            marching: true,
            tol: 1e-6,
            max_iter: 1000,
            fw_tol: 1e-10,
            fw_max_iter: 200,
            sigma_floor: 0.05,
        }
    }
}

/// Weight of the uniform priors mixed in when moving to a finer grid, so that
/// no configuration starts with exactly zero prior.
const LIFT_MIX: f64 = 1e-3;

struct RestartOutcome {
    x: Signal,
    priors: EmPriors,
    loglik: f64,
    stages: Vec<StageSummary>,
    trace: Vec<TraceRow>,
}

/// Estimates the signal and shift priors by approximate EM.
pub fn estimate_em(y: &Measurement, mode: Mode, cfg: &EmConfig, seed: u64) -> Result<EstimateReport> {
    let l = y.signal_len();
    if y.len() < 2 * l {
        return Err(MtdError::invalid(format!(
            "measurement length {} is below 2L = {}",
            y.len(),
            2 * l
        )));
    }
    if cfg.restarts == 0 {
        return Err(MtdError::invalid("restarts must be at least 1"));
    }
    let start = Instant::now();
    let segments = SegmentSet::from_measurement(y);
    let segments = segments.with_sigma(y.sigma().max(cfg.sigma_floor));
    let outcomes: Vec<Result<RestartOutcome>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| run_restart(&segments, mode, cfg, derive_seed(seed, &[label("em"), r as u64])))
        .collect();

    let objectives: Vec<Option<f64>> = outcomes.iter().map(|o| o.as_ref().ok().map(|o| o.loglik)).collect();
    let best = objectives
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.filter(|v| v.is_finite()).map(|v| (i, v)))
        .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i);
    let Some(best) = best else {
        let last = outcomes
            .into_iter()
            .rev()
            .find_map(|o| o.err())
            .map(|e| e.to_string())
            .unwrap_or_else(|| "non-finite log-likelihood".into());
        return Err(MtdError::AllRestartsFailed {
            restarts: cfg.restarts,
            last,
        });
    };
    let o = outcomes.into_iter().nth(best).expect("index in range").expect("selected restart succeeded");
    let (rho0_hat, rho1_hat) = match &o.priors {
        EmPriors::Ws { .. } => (o.priors.implied_rho0(), Vec::new()),
        EmPriors::Asd { rho1, .. } => (o.priors.implied_rho0(), rho1.clone()),
    };
    Ok(EstimateReport {
        method: Method::Em,
        mode,
        x_hat: o.x,
        rho0_hat,
        rho1_hat,
        final_cost: None,
        log_likelihood: Some(o.loglik),
        stages: o.stages,
        restart: best,
        restart_objectives: objectives,
        priors: Some(o.priors),
        trace: o.trace,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

fn uniform(mode: Mode, g: usize) -> EmPriors {
    match mode {
        Mode::Ws => EmPriors::uniform_ws(g),
        Mode::Asd => EmPriors::uniform_asd(g),
    }
}

fn run_restart(segments: &SegmentSet, mode: Mode, cfg: &EmConfig, seed: u64) -> Result<RestartOutcome> {
    let l = segments.signal_len();
    let mut rng = rng_from_seed(seed);
    let mut x = Signal::random_normalized(l, &mut rng);
    let schedule: Vec<(usize, Resolution)> = if cfg.marching {
        em_schedule(l)
    } else {
        vec![((l + 1) / 2, Resolution::FULL)]
    };

    let mut priors: Option<(EmPriors, Resolution)> = None;
    let mut stages = Vec::new();
    let mut trace = Vec::new();
    for (stage, &(n, res)) in schedule.iter().enumerate() {
        let space = ConfigSpace::new(l, res, mode);
        let mut p = match &priors {
            None => uniform(mode, space.grid),
            Some((prev, from)) => lift_priors(prev, *from, res, l),
        };
        let mut last_ll = f64::NEG_INFINITY;
        let mut iterations = 0;
        for it in 0..cfg.max_iter {
            let acc = accumulate(segments, x.values(), &p, &space)?;
            if !acc.loglik.is_finite() {
                return Err(MtdError::NonFiniteCost);
            }
            last_ll = acc.loglik;
            trace.push(TraceRow {
                stage,
                iteration: it,
                loglik: acc.loglik,
            });
            let x_new = signal_from_accum(&acc)?;
            let w = acc.prior_weights();
            p = match mode {
                Mode::Ws => update_ws(&w)?,
                Mode::Asd => update_asd(&w, &p, cfg.fw_tol, cfg.fw_max_iter)?.0,
            };
            let diff: f64 = x_new
                .values()
                .iter()
                .zip(x.values())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            let change = diff / x.norm().max(f64::MIN_POSITIVE);
            x = x_new;
            iterations = it + 1;
            if change < cfg.tol {
                break;
            }
        }
        stages.push(StageSummary {
            n_max: Some(n),
            delta_x: res.as_f64(),
            objective: last_ll,
            iterations,
        });
        priors = Some((p, res));
    }

    let (p, res) = priors.expect("schedule is non-empty");
    let space = ConfigSpace::new(l, res, mode);
    let loglik = accumulate(segments, x.values(), &p, &space)?.loglik;
    Ok(RestartOutcome {
        x,
        priors: p,
        loglik,
        stages,
        trace,
    })
}

/// Carries priors from one grid to a finer one.
pub(crate) fn lift_priors(p: &EmPriors, from: Resolution, to: Resolution, l: usize) -> EmPriors {
    let gb = to.grid_len(l);
    let lifted = match p {
        EmPriors::Ws { alpha } => {
            let ga = alpha.len() / 2;
            let mut out = vec![0.0; 2 * gb];
            out[0] = alpha[0];
            for (k, o) in out.iter_mut().enumerate().skip(1) {
                let ka = from.nearest_coarse(to.round_mul(k as i64)).clamp(1, 2 * ga as i64 - 1);
                *o = alpha[ka as usize];
            }
            let rest: f64 = out[1..].iter().sum();
            if rest > 0.0 {
                let scale = (1.0 - alpha[0]) / rest;
                out[1..].iter_mut().for_each(|v| *v *= scale);
                EmPriors::Ws { alpha: out }
            } else {
                EmPriors::uniform_ws(gb)
            }
        }
        EmPriors::Asd { alpha0, alpha1, rho1 } => {
            let ga = rho1.len() + 1;
            let rho0 = ga as f64 * alpha1 + rho1.iter().sum::<f64>();
            if !(rho0 > 0.0) {
                EmPriors::uniform_asd(gb)
            } else {
                let xi: Vec<f64> = rho1.iter().map(|r| r / rho0).collect();
                let coarse = rebin_gaps(&spread_rho1(&xi, from, l), to);
                let xi_b: Vec<f64> = (0..gb - 1).map(|i| coarse.get(i + gb).copied().unwrap_or(0.0)).collect();
                let tail = (1.0 - xi_b.iter().sum::<f64>()).max(0.0);
                let c = constraint_weights(gb);
                let gbf = gb as f64;
                let unit = c[1] * tail / gbf + xi_b.iter().zip(&c[2..]).map(|(x, c)| x * c).sum::<f64>();
                if !(unit > 0.0) {
                    EmPriors::uniform_asd(gb)
                } else {
                    let scale = (1.0 - alpha0) / unit;
                    EmPriors::Asd {
                        alpha0: *alpha0,
                        alpha1: scale * tail / gbf,
                        rho1: xi_b.iter().map(|x| scale * x).collect(),
                    }
                }
            }
        }
    };
    mix_uniform(&lifted, gb)
}

fn mix_uniform(p: &EmPriors, g: usize) -> EmPriors {
    match p {
        EmPriors::Ws { alpha } => {
            let u = 1.0 / (2 * g) as f64;
            let mut a: Vec<f64> = alpha.iter().map(|v| (1.0 - LIFT_MIX) * v + LIFT_MIX * u).collect();
            let s: f64 = a.iter().sum();
            a.iter_mut().for_each(|v| *v /= s);
            EmPriors::Ws { alpha: a }
        }
        EmPriors::Asd { .. } => {
            let u = EmPriors::uniform_asd(g).theta();
            let mut t: Vec<f64> = p
                .theta()
                .iter()
                .zip(&u)
                .map(|(a, b)| (1.0 - LIFT_MIX) * a + LIFT_MIX * b)
                .collect();
            let c = constraint_weights(g);
            let s: f64 = t.iter().zip(&c).map(|(a, b)| a * b).sum();
            t.iter_mut().for_each(|v| *v /= s);
            EmPriors::from_theta(&t)
        }
    }
}
