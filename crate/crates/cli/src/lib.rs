//! Experiment runner: parses sweep configs, runs simulated and closed-form
//! realizations in parallel and writes the results CSV.

pub mod config;
pub mod runner;
pub mod seeds;

pub use config::{Cell, ConfigError, ExperimentConfig, Mode, Profile};
pub use runner::{describe, run, NodeRow, RunOptions, RunOutput};
