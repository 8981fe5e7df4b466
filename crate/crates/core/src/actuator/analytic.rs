//! Laplace-domain model of the actuator with the winding inductance neglected.
//!
//! With `x = theta_m / n` the motor and transmission collapse to
//!
//! ```text
//! d(s) x = n k_t V + R (b_c s + k_c) theta_h
//! d(s)   = J_e s^2 + b_e s + k_e
//! J_e = n^2 J_m R,  b_e = n^2 R b_m + n^2 k_b k_t + R b_c,  k_e = R k_c
//! ```
//!
//! and the interaction torque is `tau_a = G1(s) V + G2(s) theta_h`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use super::params::ActuatorSpec;
use crate::error::Result;
use crate::lti::poly;
use crate::lti::TransferFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivedParams {
    /// `J_e = n^2 J_m R`
    pub effective_inertia: f64,
    /// `b_e = n^2 R b_m + n^2 k_b k_t + R b_c`
    pub effective_damping: f64,
    /// `k_e = R k_c`
    pub effective_stiffness: f64,
    /// rad/s
    pub natural_frequency: f64,
    pub natural_frequency_hz: f64,
}

pub fn derived_params(spec: &ActuatorSpec) -> DerivedParams {
    let m = &spec.motor;
    let t = &spec.transmission;
    let n2 = t.gear_ratio * t.gear_ratio;
    let je = n2 * m.inertia * m.resistance;
    let be = n2 * m.resistance * m.friction
        + n2 * m.back_emf_constant * m.torque_constant
        + m.resistance * t.damping;
    let ke = m.resistance * t.stiffness;
    let wn = (ke / je).sqrt();
    DerivedParams {
        effective_inertia: je,
        effective_damping: be,
        effective_stiffness: ke,
        natural_frequency: wn,
        natural_frequency_hz: wn / (2.0 * PI),
    }
}

/// `sqrt(k_c / (n^2 J_m))`, the resistance-free form of the natural frequency.
pub fn natural_frequency_direct(spec: &ActuatorSpec) -> f64 {
    let n = spec.transmission.gear_ratio;
    (spec.transmission.stiffness / (n * n * spec.motor.inertia)).sqrt()
}

/// `d(s)` coefficients, descending.
pub fn characteristic(spec: &ActuatorSpec) -> [f64; 3] {
    let d = derived_params(spec);
    [d.effective_inertia, d.effective_damping, d.effective_stiffness]
}

/// `n1(s) = b_c s + k_c`
pub fn n1(spec: &ActuatorSpec) -> [f64; 2] {
    [spec.transmission.damping, spec.transmission.stiffness]
}

/// `n2 = n k_t`
pub fn n2(spec: &ActuatorSpec) -> f64 {
    spec.transmission.gear_ratio * spec.motor.torque_constant
}

/// `n3(s) = -n^2 [J_m R s^2 + (R b_m + k_b k_t) s]`
pub fn n3(spec: &ActuatorSpec) -> [f64; 3] {
    let m = &spec.motor;
    let nsq = spec.transmission.gear_ratio * spec.transmission.gear_ratio;
    [
        -nsq * (m.inertia * m.resistance),
        -nsq * (m.resistance * m.friction + m.back_emf_constant * m.torque_constant),
        0.0,
    ]
}

/// Voltage to interaction torque with the hip held still.
pub fn g1_tf(spec: &ActuatorSpec) -> Result<TransferFunction> {
    let num = poly::scale(&n1(spec), n2(spec));
    TransferFunction::new(&num, &characteristic(spec))
}

/// Hip angle to interaction torque with zero voltage. The numerator is cubic
/// over a quadratic denominator, so the result is flagged improper and only
/// evaluated in frequency, never realized in state space.
pub fn g2_tf(spec: &ActuatorSpec) -> Result<TransferFunction> {
    let num = poly::mul(&n1(spec), &n3(spec));
    TransferFunction::new_improper(&num, &characteristic(spec))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LimitCase {
    /// `n -> 0`: the resistive torque vanishes.
    SmallRatio,
    /// `n -> inf`: the transmission spring-damper dominates, `-(b_c s + k_c)`.
    LargeRatio,
    /// `n = 1` substituted symbolically.
    UnityRatio,
}

/// Closed-form asymptotes of the hip-motion transfer, used as oracles for [`g2_tf`].
pub fn limit_case_tf(spec: &ActuatorSpec, case: LimitCase) -> Result<TransferFunction> {
    let m = &spec.motor;
    let t = &spec.transmission;
    match case {
        LimitCase::SmallRatio => TransferFunction::new(&[0.0], &[1.0]),
        LimitCase::LargeRatio => TransferFunction::new_improper(&[-t.damping, -t.stiffness], &[1.0]),
        LimitCase::UnityRatio => {
            let jr = m.inertia * m.resistance;
            let motor = [jr, m.resistance * m.friction + m.back_emf_constant * m.torque_constant, 0.0];
            let num: Vec<f64> = poly::mul(&[t.damping, t.stiffness], &motor)
                .into_iter()
                .map(|c| -c)
                .collect();
            let den = [
                jr,
                m.resistance * m.friction + m.back_emf_constant * m.torque_constant + m.resistance * t.damping,
                m.resistance * t.stiffness,
            ];
            TransferFunction::new_improper(&num, &den)
        }
    }
}

/// `Z_o(jw) = G2(jw) / (jw)`, Nm*s/rad. At `w = 0` returns the analytic limit
/// `-n^2 (b_m + k_b k_t / R)`.
pub fn output_impedance(spec: &ActuatorSpec, omega: f64) -> Result<Complex64> {
    if omega == 0.0 {
        let m = &spec.motor;
        let nsq = spec.transmission.gear_ratio * spec.transmission.gear_ratio;
        return Ok(Complex64::new(
            -nsq * (m.friction + m.back_emf_constant * m.torque_constant / m.resistance),
            0.0,
        ));
    }
    let g2 = g2_tf(spec)?.freq_response_at(omega)?;
    Ok(g2 / Complex64::new(0.0, omega))
}
