//! Experiment harness for element-level differential privacy.
//!
//! [`plan::ExperimentPlan`] describes a replicated experiment,
//! [`experiments::run_plan`] executes it and returns a tidy result table, and
//! [`summary`] reduces tables to per-cell means with `±1.64·stderr`
//! intervals. [`commands`] wires these into the `eldp` binary.

pub mod commands;
pub mod error;
pub mod experiments;
pub mod io;
pub mod plan;
pub mod summary;

pub use error::{CliError, Result};
