//! Scenario execution, outcome classification and the stress-test drivers
//! built on top of it.

pub mod config;
pub mod grid;
pub mod run;
pub mod suites;
pub mod sweep;
pub mod trace;

pub use config::{RecoveryCriteria, ScenarioConfig};
pub use run::{run_scenario, run_scenario_with, AnalyticCheck, RunOptions, SimOutcome, Verdict};
