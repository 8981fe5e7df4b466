//! Simulation of human-exoskeleton actuator dynamics and hierarchical torque
//! control for conventional, series-elastic and quasi-direct-drive actuators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]


pub mod actuator;
pub mod control;
pub mod error;
pub mod lti;
pub mod units;

pub use error::{Error, Result};
