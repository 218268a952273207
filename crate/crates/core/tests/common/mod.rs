#![allow(dead_code)]

use autotwin::data::{
    full_grid, interval_sample, simulate_configs, Dataset, Provenance, SweepSpec,
};
use autotwin::sim::{FlowSpec, NetworkConfig};

pub fn small_sweep() -> SweepSpec {
    SweepSpec {
        bw_min: 25.0,
        bw_max: 125.0,
        bw_step: 25.0,
        q_min: 50,
        q_max: 150,
        q_step: 50,
    }
}

pub fn small_flow() -> FlowSpec {
    FlowSpec {
        file_bytes: 2_000_000,
        ..FlowSpec::default()
    }
}

pub fn small_grid() -> Vec<NetworkConfig> {
    full_grid(&small_sweep()).unwrap()
}

/// Every config of the 225-point small grid, simulated.
pub fn small_dataset() -> Dataset {
    Dataset::new(
        simulate_configs(&small_grid(), &small_flow()).unwrap(),
        Provenance::Simulated,
    )
}

pub fn small_sample(n: usize) -> Dataset {
    let configs = interval_sample(&small_grid(), n).unwrap();
    Dataset::new(
        simulate_configs(&configs, &small_flow()).unwrap(),
        Provenance::Simulated,
    )
}
