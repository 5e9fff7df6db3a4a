//! File formats, experiment configuration and the command-line harness for
//! `divnet-core`.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod format;
pub mod report;

pub use config::ExperimentConfig;
pub use error::CliError;
