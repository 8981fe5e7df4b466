//! Scenario-driven harness for the actuator benchmarks: closed-loop
//! bandwidth, backdrive torque, paradigm comparison, assisted-walking
//! tracking and phase-estimator training.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod references;
pub mod report;
pub mod scenario;

pub use commands::{run, Command, RunOptions};
pub use report::{Cell, Report};
pub use scenario::{load_scenario, parse_scenario, Experiment, Scenario};

use exosim::Error;

/// Process exit status for a failed run.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Schema(_) => 3,
        Error::Unit(_) => 4,
        Error::Instability { .. } => 5,
        Error::Divergence { .. } | Error::TrainingDivergence { .. } => 6,
        Error::Config(_) | Error::Io(_) => 7,
        _ => 1,
    }
}
