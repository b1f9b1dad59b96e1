//! Fixtures shared by the kernel benchmarks.

use mtd_core::model::generate_support_rejection;
use mtd_core::{synthesize, Measurement, Mode, Signal};

/// Synthetic measurement with the bundled signal: density 0.3 (ws) or 0.5 (asd).
pub fn fixture(n: usize, mode: Mode, sigma: f64, seed: u64) -> Measurement {
    let x = Signal::bundled();
    let l = x.len();
    let (density, w) = match mode {
        Mode::Ws => (0.3, l - 1),
        Mode::Asd => (0.5, 0),
    };
    let m = (density * n as f64 / l as f64).round() as usize;
    let s = generate_support_rejection(n, l, m, w, seed).expect("feasible density");
    synthesize(&s, &x, sigma, seed ^ 0x5eed).expect("valid instance")
}
