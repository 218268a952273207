//! Automated generation and validation of data-driven latency twins for a
//! two-path ("diamond") network.
//!
//! The crate bundles a discrete-event ground-truth simulator, dataset
//! generation and CSV interchange, noise injection and Savitzky-Golay
//! cleaning, a budgeted model-selection engine with a weighted ensemble,
//! an inference runtime for the resulting twins, and the benchmark harness
//! that compares twin and simulator.

pub mod automl;
pub mod bench;
pub mod data;
pub mod pipeline;
pub mod runtime;
pub mod seeds;
pub mod signal;
pub mod sim;
