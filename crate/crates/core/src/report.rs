//! Result of an estimation run.

use serde::{Deserialize, Serialize};

use crate::em::EmPriors;
use crate::model::{Mode, Signal};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Aa,
    Em,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Aa => "aa",
            Method::Em => "em",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One frequency-marching stage of the selected restart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    /// Fourier order; `None` for the final signal-space refinement.
    pub n_max: Option<usize>,
    pub delta_x: f64,
    /// Cost (AA) or log-likelihood (EM) at the end of the stage.
    pub objective: f64,
    pub iterations: usize,
}

/// Per-iteration log-likelihood of an EM run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub stage: usize,
    pub iteration: usize,
    pub loglik: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: Method,
    pub mode: Mode,
    pub x_hat: Signal,
    pub rho0_hat: f64,
    /// Empty in well-separated mode.
    pub rho1_hat: Vec<f64>,
    /// Final least-squares cost (AA).
    pub final_cost: Option<f64>,
    /// Final log-likelihood (EM).
    pub log_likelihood: Option<f64>,
    pub stages: Vec<StageSummary>,
    /// Index of the selected restart.
    pub restart: usize,
    /// Final objective per restart; `None` where the restart failed.
    pub restart_objectives: Vec<Option<f64>>,
    pub priors: Option<EmPriors>,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
    /// Excluded from equality.
    pub wall_time_secs: f64,
}

impl PartialEq for EstimateReport {
    fn eq(&self, o: &Self) -> bool {
        self.method == o.method
            && self.mode == o.mode
            && self.x_hat == o.x_hat
            && self.rho0_hat.to_bits() == o.rho0_hat.to_bits()
            && self.rho1_hat == o.rho1_hat
            && self.final_cost == o.final_cost
            && self.log_likelihood == o.log_likelihood
            && self.stages == o.stages
            && self.restart == o.restart
            && self.restart_objectives == o.restart_objectives
            && self.priors == o.priors
            && self.trace == o.trace
    }
}

impl EstimateReport {
    /// JSON without the wall time, so that fixed-seed runs serialize identically.
    pub fn to_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("wall_time_secs");
        }
        serde_json::to_string_pretty(&v).expect("report serializes")
    }
}
