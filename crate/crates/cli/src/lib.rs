//! Experiment driver behind the `covertsim` binary.

pub mod config;
pub mod experiments;

pub use config::{parse_config, ConfigError, ExperimentConfig, Scenario};
pub use experiments::{run, Report};
