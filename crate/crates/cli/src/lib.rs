//! Experiment registry and runner for the `fiberdim` command line tool.

pub mod config;
pub mod estimate;
pub mod experiments;
pub mod output;
pub mod thresholds;
