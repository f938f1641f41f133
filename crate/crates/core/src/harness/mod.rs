//! Configuration, reference data and subcommand drivers for the CLI.

pub mod commands;
pub mod config;
pub mod reference;

pub use commands::{par_map, run_command, Command, CommandOutput, RunOptions};
pub use config::{ExperimentConfig, ModelKind};
pub use reference::{ReferenceTable, TABLE1, TABLE2};
