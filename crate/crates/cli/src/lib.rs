//! Command-line orchestration: run configs, caching, sweeps and export.

pub mod cache;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_check, cmd_rabimap, cmd_solve, cmd_sweep, cmd_symmetry};
pub use config::RunConfig;
pub use error::CliError;
