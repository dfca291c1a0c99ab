//! Experiment runner for `conelab-core`: configuration, scenarios, the run
//! store and reports.

pub mod config;
pub mod record;
pub mod report;
pub mod scenarios;
pub mod store;
pub mod thresholds;

pub use config::{ExperimentConfig, Overrides, Scenario};
pub use record::{Record, Verdict};
