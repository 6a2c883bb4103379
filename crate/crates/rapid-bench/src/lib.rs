//! Shared fixtures for the criterion benchmarks.

use rapid_core::dataset::Dataset;
use rapid_core::simgen::{self, SimConfig};

/// Simulated health-survey data at a fixed dependency strength.
pub fn bench_data(n: usize) -> Dataset {
    simgen::generate(&SimConfig {
        n,
        kappa: 10.0,
        rng_seed: 42,
    })
    .expect("benchmark data")
}

pub fn bench_qi() -> Vec<String> {
    simgen::sim_qi_columns()
}

pub const BENCH_SENSITIVE: &str = simgen::SIM_SENSITIVE;
