//! Shared fixtures for the criterion benchmarks.

use uavsim_core::engine::generate_for;
use uavsim_core::{Scenario, Settings};

/// Default settings and the scenario drawn for `seed`.
pub fn fixture(seed: u64) -> (Scenario, Settings) {
    let settings = Settings::default();
    let sc = generate_for(seed, &settings).expect("default settings are valid");
    (sc, settings)
}
