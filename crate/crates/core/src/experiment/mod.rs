//! Configured experiments: presets, config files, result tables and the
//! `solve` / `kl` / `mi` / `bounds` commands behind the CLI.

mod config;
mod presets;
mod runner;
mod table;

pub use config::{BudgetSpec, ConstantsSpec, DriftSpec, ExperimentConfig, GridSpec, MessageSpec, OutputSpec};
pub use presets::{build_channel, build_preset, PRESETS};
pub use runner::{exit_code, run_command, write_outputs, Command, Outcome, Overrides, EXIT_BOUND_VIOLATION};
pub use table::{Cell, Table};
