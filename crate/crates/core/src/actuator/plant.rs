//! Saturated nonlinear realization of the coupled human-exoskeleton model.
//!
//! ```text
//! L di/dt   = V_sat - k_b w_m - R i            (i algebraic when L is neglected)
//! J_m dw_m  = k_t i - b_m w_m - tau_a / n
//! tau_a     = b_c (w_m / n - w_h) + k_c (theta_m / n - theta_h)
//! J_h dw_h  = tau_l + tau_a                    (coupled-human only)
//! ```

use nalgebra::DMatrix;

use super::params::{ActuatorSpec, HumanParams};
use crate::error::{Error, Result};
use crate::lti::frf::SineProbe;
use crate::lti::sim::{zero_signal, Signal, System};
use crate::lti::ss::StateSpace;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CouplingMode {
    /// Output link clamped: `theta_h = 0`.
    LockedOutput,
    /// Output link driven by a prescribed hip trajectory.
    PassiveBackdrive,
    /// Hip integrated from the limb dynamics under muscle torque.
    CoupledHuman,
}

/// Output channels, in order.
pub const OUTPUTS: [&str; 9] = [
    "tau_a", "voltage", "current", "theta_h", "omega_h", "theta_2", "tau_1", "tau_2", "theta_m",
];
pub const OUT_TAU_A: usize = 0;
pub const OUT_VOLTAGE: usize = 1;
pub const OUT_CURRENT: usize = 2;
pub const OUT_THETA_H: usize = 3;
pub const OUT_OMEGA_H: usize = 4;
pub const OUT_THETA_2: usize = 5;
pub const OUT_TAU_1: usize = 6;
pub const OUT_TAU_2: usize = 7;
pub const OUT_THETA_M: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Layout {
    current: Option<usize>,
    theta_m: usize,
    omega_m: usize,
    hip: Option<usize>,
    dim: usize,
}

impl Layout {
    fn new(mode: CouplingMode, include_inductance: bool) -> Self {
        let base = usize::from(include_inductance);
        let hip = (mode == CouplingMode::CoupledHuman).then_some(base + 2);
        Self {
            current: include_inductance.then_some(0),
            theta_m: base,
            omega_m: base + 1,
            hip,
            dim: base + 2 + if hip.is_some() { 2 } else { 0 },
        }
    }
}

#[derive(Clone)]
pub struct Plant {
    spec: ActuatorSpec,
    human: HumanParams,
    mode: CouplingMode,
    include_inductance: bool,
    layout: Layout,
    voltage: Signal,
    x0: Vec<f64>,
    linear_rates: Vec<nalgebra::Complex<f64>>,
}

/// Instantaneous signals of the plant at one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Telemetry {
    pub voltage: f64,
    pub current: f64,
    pub tau_a: f64,
    pub theta_h: f64,
    pub omega_h: f64,
    /// Gearbox output angle `theta_m / n`.
    pub theta_2: f64,
    /// Load torque reflected to the motor shaft, `tau_a / n`.
    pub tau_1: f64,
    /// `n * tau_1`
    pub tau_2: f64,
    pub theta_m: f64,
}

impl Plant {
    pub fn new(
        spec: ActuatorSpec,
        human: HumanParams,
        mode: CouplingMode,
        include_inductance: bool,
    ) -> Result<Self> {
        spec.validate()?;
        human.validate()?;
        if mode == CouplingMode::PassiveBackdrive && human.prescribed.is_none() {
            return Err(Error::Config(
                "passive backdrive needs a prescribed hip trajectory".into(),
            ));
        }
        let layout = Layout::new(mode, include_inductance);
        let mut plant = Self {
            spec,
            human,
            mode,
            include_inductance,
            layout,
            voltage: zero_signal(),
            x0: vec![0.0; layout.dim],
            linear_rates: Vec::new(),
        };
        plant.linear_rates = plant.linearization().complex_eigenvalues().iter().copied().collect();
        Ok(plant)
    }

    /// Voltage command (before saturation) as a time function.
    pub fn with_voltage(mut self, voltage: Signal) -> Self {
        self.voltage = voltage;
        self
    }

    pub fn with_initial_state(mut self, x0: &[f64]) -> Result<Self> {
        if x0.len() != self.layout.dim {
            return Err(Error::Dimension {
                expected: self.layout.dim,
                got: x0.len(),
            });
        }
        self.x0 = x0.to_vec();
        Ok(self)
    }

    pub fn spec(&self) -> &ActuatorSpec {
        &self.spec
    }

    pub fn mode(&self) -> CouplingMode {
        self.mode
    }

    pub fn includes_inductance(&self) -> bool {
        self.include_inductance
    }

    pub fn state_dim(&self) -> usize {
        self.layout.dim
    }

    pub fn saturate(&self, v: f64) -> f64 {
        let vmax = self.spec.motor.max_voltage;
        v.clamp(-vmax, vmax)
    }

    fn hip(&self, t: f64, x: &[f64]) -> (f64, f64) {
        match self.mode {
            CouplingMode::LockedOutput => (0.0, 0.0),
            CouplingMode::PassiveBackdrive => {
                let m = self.human.prescribed.as_ref().expect("checked at construction");
                ((m.angle)(t), (m.rate)(t))
            }
            CouplingMode::CoupledHuman => {
                let h = self.layout.hip.expect("coupled layout");
                (x[h], x[h + 1])
            }
        }
    }

    fn current(&self, x: &[f64], v_sat: f64) -> f64 {
        match self.layout.current {
            Some(i) => x[i],
            None => {
                let m = &self.spec.motor;
                (v_sat - m.back_emf_constant * x[self.layout.omega_m]) / m.resistance
            }
        }
    }

    /// Interaction torque on the limb.
    pub fn interaction_torque(&self, t: f64, x: &[f64]) -> f64 {
        self.torque_at(x, self.hip(t, x))
    }

    fn torque_at(&self, x: &[f64], (th, wh): (f64, f64)) -> f64 {
        let tr = &self.spec.transmission;
        let n = tr.gear_ratio;
        tr.damping * (x[self.layout.omega_m] / n - wh) + tr.stiffness * (x[self.layout.theta_m] / n - th)
    }

    /// State derivative under an explicit (unsaturated) voltage command.
    pub fn dynamics(&self, t: f64, x: &[f64], v_cmd: f64, dx: &mut [f64]) {
        let tau_l = if self.layout.hip.is_some() {
            (self.human.muscle_torque)(t)
        } else {
            0.0
        };
        self.rhs(x, self.saturate(v_cmd), self.hip(t, x), tau_l, dx);
    }

    fn rhs(&self, x: &[f64], v: f64, hip: (f64, f64), tau_l: f64, dx: &mut [f64]) {
        let m = &self.spec.motor;
        let n = self.spec.transmission.gear_ratio;
        let l = &self.layout;
        let i = self.current(x, v);
        let tau_a = self.torque_at(x, hip);
        let wm = x[l.omega_m];
        if let Some(ic) = l.current {
            dx[ic] = (v - m.back_emf_constant * wm - m.resistance * i) / m.inductance;
        }
        dx[l.theta_m] = wm;
        dx[l.omega_m] = (m.torque_constant * i - m.friction * wm - tau_a / n) / m.inertia;
        if let Some(h) = l.hip {
            dx[h] = x[h + 1];
            dx[h + 1] = (tau_l + tau_a) / self.human.inertia;
        }
    }

    /// Hip angle and rate seen by the transmission: state in coupled mode,
    /// otherwise the exogenous values.
    fn hip_for(&self, x: &[f64], exogenous: (f64, f64)) -> (f64, f64) {
        match self.layout.hip {
            Some(h) => (x[h], x[h + 1]),
            None if self.mode == CouplingMode::LockedOutput => (0.0, 0.0),
            None => exogenous,
        }
    }

    pub fn telemetry(&self, t: f64, x: &[f64], v_cmd: f64) -> Telemetry {
        let n = self.spec.transmission.gear_ratio;
        let v = self.saturate(v_cmd);
        let (theta_h, omega_h) = self.hip(t, x);
        let tau_a = self.interaction_torque(t, x);
        let tau_1 = tau_a / n;
        Telemetry {
            voltage: v,
            current: self.current(x, v),
            tau_a,
            theta_h,
            omega_h,
            theta_2: x[self.layout.theta_m] / n,
            tau_1,
            tau_2: n * tau_1,
            theta_m: x[self.layout.theta_m],
        }
    }

    pub fn write_outputs(&self, t: f64, x: &[f64], v_cmd: f64, y: &mut [f64]) {
        let s = self.telemetry(t, x, v_cmd);
        y[OUT_TAU_A] = s.tau_a;
        y[OUT_VOLTAGE] = s.voltage;
        y[OUT_CURRENT] = s.current;
        y[OUT_THETA_H] = s.theta_h;
        y[OUT_OMEGA_H] = s.omega_h;
        y[OUT_THETA_2] = s.theta_2;
        y[OUT_TAU_1] = s.tau_1;
        y[OUT_TAU_2] = s.tau_2;
        y[OUT_THETA_M] = s.theta_m;
    }

    /// State matrix of the unsaturated dynamics.
    pub fn linearization(&self) -> DMatrix<f64> {
        self.linear_model().a
    }

    /// Unsaturated model with inputs `[V, theta_h, omega_h, tau_l]` and the
    /// single output `tau_a`. Hip inputs only act in passive-backdrive mode
    /// and `tau_l` only in coupled-human mode. The model is affine, so
    /// columns are exact differences about the origin.
    pub fn linear_model(&self) -> StateSpace {
        let n = self.layout.dim;
        let mut a = DMatrix::zeros(n, n);
        let mut b = DMatrix::zeros(n, 4);
        let mut c = DMatrix::zeros(1, n);
        let mut d = DMatrix::zeros(1, 4);
        let mut x = vec![0.0; n];
        let mut dx = vec![0.0; n];
        let eval = |x: &[f64], u: [f64; 4], dx: &mut [f64]| {
            let hip = self.hip_for(x, (u[1], u[2]));
            let tau_l = if self.layout.hip.is_some() { u[3] } else { 0.0 };
            self.rhs(x, u[0], hip, tau_l, dx);
            self.torque_at(x, hip)
        };
        for j in 0..n {
            x[j] = 1.0;
            c[(0, j)] = eval(&x, [0.0; 4], &mut dx);
            for i in 0..n {
                a[(i, j)] = dx[i];
            }
            x[j] = 0.0;
        }
        for j in 0..4 {
            let mut u = [0.0; 4];
            u[j] = 1.0;
            d[(0, j)] = eval(&x, u, &mut dx);
            for i in 0..n {
                b[(i, j)] = dx[i];
            }
        }
        StateSpace::new(a, b, c, d).expect("plant dimensions are consistent")
    }

    /// Eigenvalues of [`Plant::linearization`].
    pub fn eigenvalues(&self) -> &[nalgebra::Complex<f64>] {
        &self.linear_rates
    }

    /// `1 / min |Re(lambda)|` over the strictly decaying modes.
    pub fn slowest_time_constant(&self) -> Option<f64> {
        let slowest = self
            .linear_rates
            .iter()
            .filter(|l| l.re < -1e-9)
            .map(|l| -l.re)
            .fold(f64::INFINITY, f64::min);
        slowest.is_finite().then(|| 1.0 / slowest)
    }
}

impl System for Plant {
    fn state_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.layout.dim);
        if self.layout.current.is_some() {
            names.push("i".to_string());
        }
        names.push("theta_m".into());
        names.push("omega_m".into());
        if self.layout.hip.is_some() {
            names.push("theta_h_state".into());
            names.push("omega_h_state".into());
        }
        names
    }

    fn output_names(&self) -> Vec<String> {
        OUTPUTS.iter().map(|s| s.to_string()).collect()
    }

    fn initial_state(&self) -> Vec<f64> {
        self.x0.clone()
    }

    fn derivatives(&self, t: f64, x: &[f64], dx: &mut [f64]) {
        self.dynamics(t, x, (self.voltage)(t), dx);
    }

    fn outputs(&self, t: f64, x: &[f64], y: &mut [f64]) {
        self.write_outputs(t, x, (self.voltage)(t), y);
    }

    fn fastest_rate(&self) -> Option<f64> {
        self.linear_rates.iter().map(|l| l.norm()).reduce(f64::max)
    }
}

/// Open-loop voltage-to-torque probing.
impl SineProbe for Plant {
    type Driven = Plant;

    fn drive(&self, input: Signal) -> Plant {
        self.clone().with_voltage(input)
    }

    fn output_index(&self) -> usize {
        OUT_TAU_A
    }

    fn settle_time(&self) -> f64 {
        self.slowest_time_constant().map_or(0.0, |tau| 7.0 * tau)
    }
}
