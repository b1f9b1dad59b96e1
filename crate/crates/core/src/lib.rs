//! Multi-target detection: estimating a short signal from a long noisy
//! measurement containing many unlocated copies of it.

pub mod aa;
pub mod baselines;
pub mod coarse;
pub mod em;
pub mod error;
pub mod grid;
pub mod io;
pub mod model;
pub mod moments;
pub mod report;
pub mod rng;

pub use error::{MtdError, Result};
pub use grid::Resolution;
pub use model::{
    DensityParams, GroundTruth, Measurement, Mode, PairSeparationFunction, Signal, SupportSequence,
};
pub use moments::{MomentStats, NoiseFloor, PartialMoments, SignalMoments};
pub use coarse::CoarseStats;
pub use aa::{estimate_aa, AaConfig};
pub use baselines::{deconv_estimate, known_support_estimate, oracle_distances, OracleDistances};
pub use em::{estimate_em, EmConfig, EmPriors};
pub use model::{rmse, synthesize};
pub use moments::{forward_asd, forward_ws, measurement_moments};
pub use report::{EstimateReport, Method, StageSummary, TraceRow};
