//! Experiment runner for the tabsynth toolkit: configuration, the end-to-end
//! grid, text rendering of results and prediction export.

pub mod config;
pub mod error;
pub mod experiment;
pub mod export;
pub mod render;

pub use config::{Arm, ExperimentConfig, Overrides, Profile};
pub use error::{RunError, RunResult};
pub use experiment::{run_experiment, ExperimentReport};
