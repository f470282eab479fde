//! Monte Carlo harness, scenario files and batch commands on top of
//! [`poexp_core`].

pub mod commands;
pub mod config;
pub mod mc;
pub mod output;

pub use commands::{cmd_dist, cmd_market, cmd_mean, cmd_simulate, CliError, RunOptions};
pub use config::{ConfigError, ScenarioConfig};
