//! Actuator parameters, analytic transfer functions and the saturated
//! nonlinear plant of the coupled human-exoskeleton system.

pub mod analytic;
pub mod backdrive;
pub mod params;
pub mod plant;

pub use analytic::{derived_params, g1_tf, g2_tf, limit_case_tf, output_impedance, DerivedParams, LimitCase};
pub use backdrive::{backdrive_peak, chirp_motion, BackdriveResult, Stepper, DEFAULT_BACKDRIVE_DURATION};
pub use params::{ActuatorSpec, HipMotion, HumanParams, MotorParams, Paradigm, TransmissionParams};
pub use plant::{CouplingMode, Plant, Telemetry};
