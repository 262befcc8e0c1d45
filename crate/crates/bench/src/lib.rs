//! Fixtures shared by the criterion benches.

use mhd25_core::harness::{generate_initial_data, ExperimentConfig};
use mhd25_core::state::PerturbationState;

/// Random small-data state on an `n²` grid of side `2π`.
pub fn fixture(n: usize) -> (ExperimentConfig, PerturbationState) {
    let mut cfg = ExperimentConfig::default();
    cfg.grid.n = n;
    cfg.init.amplitude = 1e-3;
    cfg.init.cutoff = (n / 8) as f64;
    cfg.init.seed = 17;
    let state = generate_initial_data(&cfg).expect("fixture config is valid");
    (cfg, state)
}
