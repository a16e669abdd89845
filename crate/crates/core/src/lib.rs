//! Longitudinal flight simulator and stress-test harness for comparing MCAS
//! stabilizer-trim controller variants under sensor faults.

pub mod cli;
pub mod controllers;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod pilot;
pub mod sads;
pub mod sensing;
pub mod timing;

pub use error::{Result, SimError};
