//! Shared helpers for the criterion benchmarks.

use flaptune::config::{broken_config, default_config, GameConfig, Scenario};

pub fn bench_configs() -> Vec<(&'static str, GameConfig)> {
    vec![
        ("default", default_config()),
        ("too_tight_1", broken_config(Scenario::TooTight1)),
        ("too_spaced_out", broken_config(Scenario::TooSpacedOut)),
    ]
}
