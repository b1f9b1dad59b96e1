//! Approximate expectation maximization over segment shift configurations.

mod estep;
mod estimate;
mod priors;
mod segments;

pub use estep::{e_step, log_likelihood, m_step_prior_asd, m_step_prior_ws, m_step_signal, ConfigSpace, PosteriorTable};
pub use priors::{prior_objective, update_asd, update_ws, EmPriors, FwDiagnostics, PriorWeights};
pub use segments::{shift_template, SegmentSet};
pub use estimate::{estimate_em, EmConfig};
