//! Autocorrelation analysis: fitting the signal and densities to the first
//! three measurement autocorrelations.

mod cost;
mod estimate;
mod fourier;
mod optim;

pub use cost::{coarse_cost, cost_asd, cost_ws};
pub use fourier::FourierParams;
pub use optim::{minimize, MinimizeOptions, MinimizeResult};
pub use estimate::{estimate_aa, AaConfig};
