//! Command-line front end: experiment configs, runs, comparisons and
//! trajectory validation.

pub mod commands;
pub mod config;

pub use commands::{cmd_compare, cmd_replay, cmd_run, Overrides, Summary};
pub use config::ExperimentConfig;
