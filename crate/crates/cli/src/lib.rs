//! Config-driven experiment runner: synthetic datasets, seed sweeps over
//! self-training arms, oracle diagnostics and report tables.

pub mod commands;
pub mod config;
pub mod diagnose;
pub mod error;
pub mod manifest;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};
