//! Gain selection for the torque loop and its analytic closed loop.
//!
//! Every paradigm is tuned by the same rule: the integral corner sits a decade
//! below the open-loop natural frequency (`ki = kp * w_n / 10`) and `kp` is
//! raised until the phase margin of `(kp + ki/s) G1(s)` falls to the target.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use super::pi::PiGains;
use crate::actuator::analytic::{characteristic, derived_params, g1_tf, n1, n2};
use crate::actuator::params::ActuatorSpec;
use crate::error::{Error, Result};
use crate::lti::poly;
use crate::lti::TransferFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TuningPolicy {
    pub phase_margin_deg: f64,
    /// `ki / (kp * w_n)`
    pub integral_ratio: f64,
}

impl Default for TuningPolicy {
    fn default() -> Self {
        Self {
            phase_margin_deg: 45.0,
            integral_ratio: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TunedLoop {
    pub gains: PiGains,
    /// rad/s
    pub crossover: f64,
    pub phase_margin_deg: f64,
}

/// `|C(jw) G1(jw)|`
pub fn loop_gain(spec: &ActuatorSpec, kp: f64, ki: f64, omega: f64) -> f64 {
    let [je, be, ke] = characteristic(spec);
    let [bc, kc] = n1(spec);
    let c = kp.hypot(ki / omega);
    let num = n2(spec) * kc.hypot(bc * omega);
    let den = (ke - je * omega * omega).hypot(be * omega);
    c * num / den
}

/// Unwrapped phase of `C(jw) G1(jw)` in radians, summed factor by factor so
/// it stays continuous across the whole axis.
pub fn loop_phase(spec: &ActuatorSpec, kp: f64, ki: f64, omega: f64) -> f64 {
    let [je, be, ke] = characteristic(spec);
    let [bc, kc] = n1(spec);
    (kp * omega).atan2(ki) - FRAC_PI_2 + (bc * omega).atan2(kc)
        - (be * omega).atan2(ke - je * omega * omega)
}

const OMEGA_LO: f64 = 1e-6;
const OMEGA_HI: f64 = 1e8;

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> bool) -> f64 {
    // invariant: f(lo) true, f(hi) false; geometric midpoint on a log axis
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if f(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-13 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Highest frequency where the loop gain crosses unity, rad/s.
pub fn gain_crossover(spec: &ActuatorSpec, kp: f64, ki: f64) -> Option<f64> {
    let grid: Vec<f64> = (0..=2800)
        .map(|i| OMEGA_LO * (OMEGA_HI / OMEGA_LO).powf(i as f64 / 2800.0))
        .collect();
    let above = |w: f64| loop_gain(spec, kp, ki, w) >= 1.0;
    let i = grid.iter().rposition(|w| above(*w))?;
    if i + 1 == grid.len() {
        return None;
    }
    Some(bisect(grid[i], grid[i + 1], above))
}

/// Phase margin in degrees, `None` without a crossover.
pub fn phase_margin(spec: &ActuatorSpec, kp: f64, ki: f64) -> Option<f64> {
    let wc = gain_crossover(spec, kp, ki)?;
    Some((PI + loop_phase(spec, kp, ki, wc)).to_degrees())
}

/// Apply the tuning rule. `kp` is the upper edge of the first interval of
/// gains, starting from zero, that keeps the target margin.
pub fn tune_pi(spec: &ActuatorSpec, policy: &TuningPolicy) -> Result<TunedLoop> {
    spec.validate()?;
    let wn = derived_params(spec).natural_frequency;
    let ratio = policy.integral_ratio * wn;
    let ok = |kp: f64| {
        phase_margin(spec, kp, kp * ratio).is_some_and(|pm| pm >= policy.phase_margin_deg)
    };
    let mut lo = 1e-2;
    if !ok(lo) {
        return Err(Error::Config(format!(
            "{}: no gain meets a {} deg phase margin",
            spec.name, policy.phase_margin_deg
        )));
    }
    let mut hi = lo;
    while ok(hi) {
        lo = hi;
        hi *= 1.25;
        if hi > 1e7 {
            return Err(Error::Config(format!(
                "{}: phase margin never drops to {} deg",
                spec.name, policy.phase_margin_deg
            )));
        }
    }
    let kp = bisect(lo, hi, ok);
    let ki = kp * ratio;
    let crossover = gain_crossover(spec, kp, ki).expect("tuned loop has a crossover");
    Ok(TunedLoop {
        gains: PiGains {
            kp,
            ki,
            feedforward: feedforward_gain(spec),
            integrator_limit: spec.motor.max_voltage,
        },
        crossover,
        phase_margin_deg: phase_margin(spec, kp, ki).expect("crossover exists"),
    })
}

/// Inverse DC torque gain `R / (n k_t)`, V/Nm.
pub fn feedforward_gain(spec: &ActuatorSpec) -> f64 {
    spec.motor.resistance / (spec.transmission.gear_ratio * spec.motor.torque_constant)
}

/// Gains shipped with the spec, or the tuning rule applied on the fly.
pub fn gains_for(spec: &ActuatorSpec) -> Result<PiGains> {
    match spec.gains {
        Some(g) => Ok(g),
        None => Ok(tune_pi(spec, &TuningPolicy::default())?.gains),
    }
}

/// Reference to torque with the voltage clamp inactive:
///
/// ```text
/// T(s) = ((ff + kp) s + ki) N(s) / (s D(s) + (kp s + ki) N(s)),   G1 = N / D
/// ```
pub fn closed_loop_tf(spec: &ActuatorSpec, gains: &PiGains) -> Result<TransferFunction> {
    let g1 = g1_tf(spec)?;
    let num = g1.num();
    let den = g1.den();
    let c_num = [gains.kp, gains.ki];
    let t_num = poly::mul(&[gains.feedforward + gains.kp, gains.ki], num);
    let t_den = poly::add(&poly::mul(&[1.0, 0.0], den), &poly::mul(&c_num, num));
    TransferFunction::new(&t_num, &t_den)
}
