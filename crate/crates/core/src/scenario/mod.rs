//! Config-driven scenarios behind the command-line front end.

pub mod config;
pub mod output;
pub mod runs;
pub mod verify;

pub use config::{ConfigError, ConfigSource, Format, Overrides, Scenario, ScenarioConfig};
pub use output::{write_atomic, Document};
