//! Unpowered backdrive test: the hip sweeps a chirp with zero voltage applied.

use std::f64::consts::PI;

use nalgebra::DVector;
use serde::Serialize;

use super::analytic::g2_tf;
use super::params::{ActuatorSpec, HipMotion, HumanParams};
use super::plant::{CouplingMode, Plant, OUT_OMEGA_H, OUT_TAU_A, OUT_THETA_H};
use crate::error::{Error, Result};
use crate::lti::signal::ChirpSpec;
use crate::lti::sim::{self, signal, Trace, DEFAULT_DT};

/// Sweep length used when a scenario does not set one, s.
pub const DEFAULT_BACKDRIVE_DURATION: f64 = 100.0;

/// Rows kept in the returned trace.
const TRACE_ROWS: usize = 4000;

#[derive(Debug, Clone, Serialize)]
pub struct BackdriveResult {
    /// `max |tau_a(t)|` over the sweep, Nm.
    pub peak_torque: f64,
    /// `|G2(j 2 pi f1)| * amplitude`, Nm.
    pub predicted_peak: f64,
    /// `int tau_a * omega_h dt`, J. Non-positive for a passive mechanism.
    pub work: f64,
    pub dt: f64,
    pub stepper: Stepper,
    #[serde(skip)]
    pub trace: Trace,
}

impl BackdriveResult {
    pub fn relative_gap(&self) -> f64 {
        (self.peak_torque - self.predicted_peak).abs() / self.predicted_peak
    }
}

/// Hip trajectory following the chirp, with the sweep law continued past the
/// end so RK4 stages never see a discontinuity.
pub fn chirp_motion(drive: &ChirpSpec) -> HipMotion {
    let (a, b) = (*drive, *drive);
    HipMotion {
        angle: signal(move |t| a.amplitude * a.phase(t).sin()),
        rate: signal(move |t| b.amplitude * 2.0 * PI * b.frequency(t) * b.phase(t).cos()),
    }
}

/// Smallest RK4 step worth taking; stiffer plants switch to exact
/// first-order-hold stepping of the (linear, unpowered) model.
pub const MIN_RK4_DT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepper {
    Rk4,
    ExactFoh,
}

struct Recorder {
    every: usize,
    dt: f64,
    peak: f64,
    work: f64,
    last_power: Option<f64>,
    data: Vec<Vec<f64>>,
}

impl Recorder {
    fn new(steps: usize, dt: f64) -> Self {
        Self {
            every: (steps / TRACE_ROWS).max(1),
            dt,
            peak: 0.0,
            work: 0.0,
            last_power: None,
            data: vec![Vec::new(); 4],
        }
    }

    fn record(&mut self, k: usize, t: f64, theta_h: f64, omega_h: f64, tau: f64) {
        self.peak = self.peak.max(tau.abs());
        let power = tau * omega_h;
        if let Some(p) = self.last_power {
            self.work += 0.5 * (p + power) * self.dt;
        }
        self.last_power = Some(power);
        if k.is_multiple_of(self.every) {
            for (ch, v) in self.data.iter_mut().zip([t, theta_h, omega_h, tau]) {
                ch.push(v);
            }
        }
    }
}

pub fn backdrive_peak(spec: &ActuatorSpec, drive: &ChirpSpec) -> Result<BackdriveResult> {
    drive.validate()?;
    let motion = chirp_motion(drive);
    let plant = Plant::new(
        spec.clone(),
        HumanParams::prescribed(motion.clone()),
        CouplingMode::PassiveBackdrive,
        false,
    )?;
    let rate = sim::System::fastest_rate(&plant);
    let stepper = match rate {
        Some(r) if sim::max_stable_dt(r) < MIN_RK4_DT => Stepper::ExactFoh,
        _ => Stepper::Rk4,
    };
    let dt = match stepper {
        Stepper::Rk4 => sim::pick_dt(rate, DEFAULT_DT),
        Stepper::ExactFoh => DEFAULT_DT,
    };
    let steps = sim::steps_for(drive.duration, dt)?;
    let mut rec = Recorder::new(steps, dt);

    match stepper {
        Stepper::Rk4 => {
            let mut sys = plant;
            sim::simulate(&mut sys, dt, steps, |k, t, _x, y| {
                rec.record(k, t, y[OUT_THETA_H], y[OUT_OMEGA_H], y[OUT_TAU_A]);
            })?;
        }
        Stepper::ExactFoh => {
            let model = plant.linear_model();
            let foh = model.discretize_foh(dt)?;
            let input = |t: f64| DVector::from_vec(vec![0.0, (motion.angle)(t), (motion.rate)(t), 0.0]);
            let mut x = DVector::zeros(model.order());
            let mut u = input(0.0);
            for k in 0..=steps {
                let t = k as f64 * dt;
                let tau = (&model.c * &x + &model.d * &u)[0];
                if !tau.is_finite() {
                    return Err(Error::Divergence { time: t, frequency: None });
                }
                rec.record(k, t, u[1], u[2], tau);
                if k < steps {
                    let next = input(t + dt);
                    x = foh.step(&x, &u, &next);
                    u = next;
                }
            }
        }
    }

    let predicted_peak = g2_tf(spec)?.freq_response_at(2.0 * PI * drive.f1)?.norm() * drive.amplitude;
    let names = ["t", "theta_h", "omega_h", "tau_a"].iter().map(|s| s.to_string()).collect();
    Ok(BackdriveResult {
        peak_torque: rec.peak,
        predicted_peak,
        work: rec.work,
        dt,
        stepper,
        trace: Trace::new(dt * rec.every as f64, names, rec.data)?,
    })
}
