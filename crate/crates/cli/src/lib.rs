//! Command-line front end for the Ćuk converter PLLF toolkit: scenario
//! presets and JSON configs, trace/event CSV export, metrics and certificate
//! reports.

pub mod commands;
pub mod error;
pub mod output;
pub mod scenario;

pub use commands::{certify_command, run_command, RunOptions, RunSummary};
pub use error::CliError;
pub use scenario::{load_config, preset, resolve, Scenario, ScenarioFile, PRESET_NAMES};
