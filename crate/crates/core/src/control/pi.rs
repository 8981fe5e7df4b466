//! Outer torque loop: PI with DC-gain feedforward, voltage clamp and
//! conditional anti-windup.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PiGains {
    /// V/Nm
    pub kp: f64,
    /// V/(Nm*s)
    pub ki: f64,
    /// V/Nm, inverse of the open-loop DC torque gain.
    pub feedforward: f64,
    /// Bound on the integral contribution `ki * int(e)`, V.
    pub integrator_limit: f64,
}

impl PiGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.kp >= 0.0) || !(self.ki >= 0.0) || !self.feedforward.is_finite() {
            return Err(Error::Config(format!(
                "PI gains must satisfy kp >= 0, ki >= 0 (got kp={}, ki={}, ff={})",
                self.kp, self.ki, self.feedforward
            )));
        }
        if !(self.integrator_limit > 0.0) {
            return Err(Error::Config(format!(
                "integrator limit must be positive, got {}",
                self.integrator_limit
            )));
        }
        Ok(())
    }
}

/// Integrator memory of one loop instance.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PiState {
    /// Accumulated torque error, Nm*s.
    pub integral: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiOutput {
    /// Clamped voltage command.
    pub voltage: f64,
    /// Command before the clamp.
    pub unclamped: f64,
    pub saturated: bool,
}

/// One controller update.
///
/// `V = clamp(ff * ref + kp * e + ki * int(e), +-v_max)`. The integral is held
/// whenever the output is saturated and the error pushes further into the same
/// limit.
pub fn pi_step(
    gains: &PiGains,
    tau_ref: f64,
    tau_meas: f64,
    state: PiState,
    dt: f64,
    v_max: f64,
) -> (PiOutput, PiState) {
    let e = tau_ref - tau_meas;
    let int_bound = if gains.ki > 0.0 {
        gains.integrator_limit / gains.ki
    } else {
        f64::INFINITY
    };
    let command = |integral: f64| gains.feedforward * tau_ref + gains.kp * e + gains.ki * integral;

    let candidate = (state.integral + e * dt).clamp(-int_bound, int_bound);
    let trial = command(candidate);
    let winding_up = trial.abs() > v_max && trial.signum() == e.signum() && e != 0.0;
    let integral = if winding_up { state.integral } else { candidate };

    let unclamped = command(integral);
    let voltage = unclamped.clamp(-v_max, v_max);
    (
        PiOutput {
            voltage,
            unclamped,
            saturated: unclamped.abs() > v_max,
        },
        PiState { integral },
    )
}
