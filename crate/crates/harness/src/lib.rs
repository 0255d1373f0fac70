//! Experiment harness: configuration, subcommands and reports.

pub mod commands;
pub mod config;
pub mod report;

pub use commands::RunContext;
pub use config::ExperimentConfig;
