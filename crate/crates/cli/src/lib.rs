//! Scenario runner for rydkin: a strict TOML configuration schema with
//! explicit units, dispatch of scenario kinds onto the simulation engines,
//! CSV tables and a reproducibility manifest.

pub mod app;
pub mod config;
pub mod error;
pub mod output;
pub mod presets;
pub mod scenario;
pub mod units;

pub use config::{Config, RawConfig, ScenarioKind};
pub use error::{CliError, CliResult};
pub use output::{Bundle, Manifest, Table};
