//! Experiment harness for `jaguar-core`: TOML experiment configs, parallel
//! sweeps with reproducible outputs, aggregate reports and the property-check
//! suites behind the `jaguar` command.

pub mod config;
pub mod error;
pub mod presets;
pub mod report;
pub mod runner;
pub mod suites;

pub use error::{HarnessError, Result};
