//! Scenario runner and exporter for costlab.

pub mod inputs;
pub mod report;
pub mod runners;
pub mod scenario;

pub use report::{write_run, Check, Outcome};
pub use runners::{run, RunError};
pub use scenario::{Kind, Scenario, ScenarioError};
