//! Configuration and orchestration behind the `cgle` binary.

pub mod config;
pub mod pipeline;

pub use config::{ConfigError, RunConfig};
pub use pipeline::{exit_code, run_command, run_scenario, Command, Options, Summary};
