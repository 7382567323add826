//! Scenario runner for the `stgames-core` solvers: TOML scenario files in,
//! summary and trace tables out as CSV or JSON lines.

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod record;
pub mod run;

pub use config::{parse_scenario, parse_scenario_with, Format, Kind, Overrides, ScenarioConfig};
pub use error::{CliError, CliResult};
pub use export::{export, import};
pub use record::{Cell, RunRecord, Summary, Table};
pub use run::run_scenario;
