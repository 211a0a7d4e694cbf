//! Shared fixtures for the planner benchmarks.

use adr_planner::{data, learner::Experience, CloudRanges, DebrisCatalog, MissionConfig};

pub fn cloud(n: usize) -> DebrisCatalog {
    data::generate_cloud(n, 42, &CloudRanges::default()).expect("default ranges are valid")
}

pub fn mission(n: usize) -> MissionConfig {
    MissionConfig {
        n_debris: n,
        ..MissionConfig::default()
    }
}

/// Deterministic batch of `size` experiences with `inputs` features.
pub fn batch(size: usize, inputs: usize, actions: usize) -> Vec<Experience> {
    (0..size)
        .map(|k| Experience {
            state: (0..inputs)
                .map(|j| ((k * 31 + j * 7) % 17) as f64 / 17.0)
                .collect(),
            action: k % actions,
            reward: (k % 3) as f64,
            next_state: (0..inputs)
                .map(|j| ((k * 13 + j * 5) % 11) as f64 / 11.0)
                .collect(),
            done: k % 5 == 0,
        })
        .collect()
}
