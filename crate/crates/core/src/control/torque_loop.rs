//! Low-level torque loop around the saturated plant. The controller samples
//! the measured interaction torque at the start of every integration step and
//! holds its voltage command until the next one.

use nalgebra::DMatrix;

use super::pi::{pi_step, PiGains, PiOutput, PiState};
use crate::actuator::plant::{Plant, OUTPUTS, OUT_TAU_A};
use crate::error::Result;
use crate::lti::frf::SineProbe;
use crate::lti::sim::{Signal, System};

/// Extra channels appended after the plant outputs.
pub const LOOP_OUTPUTS: [&str; 4] = ["tau_ref", "error", "v_command", "integral"];

#[derive(Clone)]
pub struct ClosedLoop {
    plant: Plant,
    gains: PiGains,
    reference: Signal,
    state: PiState,
    held: PiOutput,
    tau_ref: f64,
    rate: Option<f64>,
}

impl ClosedLoop {
    pub fn new(plant: Plant, gains: PiGains, reference: Signal) -> Result<Self> {
        gains.validate()?;
        let rate = closed_loop_rate(&plant, &gains);
        Ok(Self {
            plant,
            gains,
            reference,
            state: PiState::default(),
            held: PiOutput {
                voltage: 0.0,
                unclamped: 0.0,
                saturated: false,
            },
            tau_ref: 0.0,
            rate,
        })
    }

    pub fn plant(&self) -> &Plant {
        &self.plant
    }

    pub fn gains(&self) -> &PiGains {
        &self.gains
    }

    /// Index of a named output channel.
    pub fn output_index(name: &str) -> Option<usize> {
        OUTPUTS.iter().chain(LOOP_OUTPUTS.iter()).position(|n| *n == name)
    }
}

/// State matrix of the unsaturated loop over `[x; int e]` with continuous PI.
pub fn closed_loop_matrix(plant: &Plant, gains: &PiGains) -> DMatrix<f64> {
    let m = plant.linear_model();
    let n = m.order();
    let mut a = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        for j in 0..n {
            a[(i, j)] = m.a[(i, j)] - gains.kp * m.b[(i, 0)] * m.c[(0, j)];
        }
        a[(i, n)] = gains.ki * m.b[(i, 0)];
    }
    for j in 0..n {
        a[(n, j)] = -m.c[(0, j)];
    }
    a
}

fn closed_loop_rate(plant: &Plant, gains: &PiGains) -> Option<f64> {
    let cl = closed_loop_matrix(plant, gains)
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max);
    Some(cl.max(plant.fastest_rate().unwrap_or(0.0)))
}

impl System for ClosedLoop {
    fn state_names(&self) -> Vec<String> {
        self.plant.state_names()
    }

    fn output_names(&self) -> Vec<String> {
        OUTPUTS.iter().chain(LOOP_OUTPUTS.iter()).map(|s| s.to_string()).collect()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.plant.initial_state()
    }

    fn sample(&mut self, t: f64, x: &[f64], dt: f64) {
        self.tau_ref = (self.reference)(t);
        let measured = self.plant.interaction_torque(t, x);
        let v_max = self.plant.spec().motor.max_voltage;
        let (out, next) = pi_step(&self.gains, self.tau_ref, measured, self.state, dt, v_max);
        self.held = out;
        self.state = next;
    }

    fn derivatives(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        self.plant.dynamics(t, x, self.held.voltage, dx);
    }

    fn outputs(&self, t: f64, x: &[f64], y: &mut [f64]) {
        let (head, tail) = y.split_at_mut(OUTPUTS.len());
        self.plant.write_outputs(t, x, self.held.voltage, head);
        tail[0] = self.tau_ref;
        tail[1] = self.tau_ref - head[OUT_TAU_A];
        tail[2] = self.held.unclamped;
        tail[3] = self.state.integral;
    }

    fn fastest_rate(&self) -> Option<f64> {
        self.rate
    }
}

/// Reference-to-torque probe of the closed loop around a given plant.
#[derive(Clone)]
pub struct TorqueLoopProbe {
    pub plant: Plant,
    pub gains: PiGains,
}

impl TorqueLoopProbe {
    /// Slowest closed-loop time constant, from the unsaturated linearization.
    fn slowest_time_constant(&self) -> Option<f64> {
        let slowest = closed_loop_matrix(&self.plant, &self.gains)
            .complex_eigenvalues()
            .iter()
            .filter(|z| z.re < -1e-9)
            .map(|z| -z.re)
            .fold(f64::INFINITY, f64::min);
        slowest.is_finite().then(|| 1.0 / slowest)
    }
}

impl SineProbe for TorqueLoopProbe {
    type Driven = ClosedLoop;

    fn drive(&self, input: Signal) -> ClosedLoop {
        ClosedLoop::new(self.plant.clone(), self.gains, input).expect("gains validated by caller")
    }

    fn output_index(&self) -> usize {
        OUT_TAU_A
    }

    fn settle_time(&self) -> f64 {
        self.slowest_time_constant().map_or(0.0, |tau| 7.0 * tau)
    }
}
