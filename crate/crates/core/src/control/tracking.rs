//! End-to-end assistance: synthetic IMU stream -> phase estimator -> torque
//! profile -> PI torque loop -> actuator worn on a hip that walks regardless
//! of the applied torque.
//!
//! The estimator runs at the IMU rate and its torque reference is held
//! between estimates. Nothing is commanded until the first full window.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::gait::{imu_stream, HipCurve, ImuStream, SAMPLE_RATE, WINDOW};
use super::mlp::{phase_error_pct, PhaseEstimator};
use super::pi::PiGains;
use super::profile::{profile_torque, TorqueProfile};
use super::torque_loop::ClosedLoop;
use crate::actuator::params::{ActuatorSpec, HipMotion, HumanParams};
use crate::actuator::plant::{CouplingMode, Plant, OUT_TAU_A, OUT_VOLTAGE};
use crate::error::{Error, Result};
use crate::lti::sim::{pick_dt, signal, simulate, steps_for, zero_signal, System, DEFAULT_DT};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackConfig {
    /// Stride frequency, Hz.
    pub cadence: f64,
    /// s
    pub duration: f64,
    /// Largest commanded torque magnitude, Nm.
    pub peak_torque: f64,
    /// IMU noise relative to channel RMS.
    pub noise: f64,
    pub seed: u64,
    /// Keep the hip at rest instead of following the stream's left leg.
    pub still_hip: bool,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            cadence: 0.95,
            duration: 10.0,
            peak_torque: 20.0,
            noise: 0.02,
            seed: 7,
            still_hip: false,
        }
    }
}

/// Signals at the IMU rate from the first estimate onward.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrackTrace {
    pub time: Vec<f64>,
    pub phase_true: Vec<f64>,
    pub phase_est: Vec<f64>,
    /// Profile at the true phase, Nm.
    pub tau_desired: Vec<f64>,
    /// Profile at the estimated phase, Nm.
    pub tau_ref: Vec<f64>,
    pub tau_a: Vec<f64>,
    pub voltage: Vec<f64>,
}

impl TrackTrace {
    pub const COLUMNS: [&'static str; 7] =
        ["t", "phase_true", "phase_est", "tau_desired", "tau_ref", "tau_a", "voltage"];

    pub fn rows(&self) -> impl Iterator<Item = [f64; 7]> + '_ {
        (0..self.time.len()).map(|i| {
            [
                self.time[i],
                self.phase_true[i],
                self.phase_est[i],
                self.tau_desired[i],
                self.tau_ref[i],
                self.tau_a[i],
                self.voltage[i],
            ]
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackResult {
    /// RMS of `tau_ref - tau_a` over every integration step, Nm.
    pub rms_error: f64,
    /// `rms_error` as a percentage of the peak torque.
    pub rms_pct: f64,
    /// RMS of `tau_desired - tau_a`, Nm, which also charges estimator error.
    pub rms_error_vs_desired: f64,
    /// RMS circular phase error of the estimator, percent of stride.
    pub phase_rms_error: f64,
    /// Largest jump between successive estimates away from the wrap, percent.
    pub max_phase_jump: f64,
    pub dt: f64,
    #[serde(skip)]
    pub trace: TrackTrace,
}

fn rms(sum_sq: f64, n: usize) -> f64 {
    (sum_sq / n.max(1) as f64).sqrt()
}

/// Circular distance of a jump between successive estimates, percent.
fn jump(prev: f64, next: f64) -> f64 {
    phase_error_pct(next, prev).abs()
}

/// Hip motion that follows the synthetic stream's left leg exactly.
fn stream_motion(cadence: f64, phase0: f64) -> HipMotion {
    let curve = HipCurve::new();
    let phase = move |t: f64| (phase0 + cadence * t).rem_euclid(1.0);
    HipMotion {
        angle: signal(move |t| curve.angle(phase(t))),
        rate: signal(move |t| curve.slope(phase(t)) * cadence),
    }
}

/// Phase estimates, in percent, for every sample that closes a full window.
fn estimate_stream(stream: &ImuStream, est: &PhaseEstimator) -> Result<Vec<f64>> {
    (WINDOW - 1..stream.len())
        .map(|k| {
            let w = stream.window(k).expect("index within stream");
            est.estimate(&w).map(|o| o.phase_pct)
        })
        .collect()
}

pub fn run_tracking(
    spec: &ActuatorSpec,
    gains: &PiGains,
    estimator: &PhaseEstimator,
    profile: &TorqueProfile,
    cfg: &TrackConfig,
) -> Result<TrackResult> {
    if !(cfg.cadence > 0.0) || !(cfg.peak_torque > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cadence and peak torque must be positive, got {} Hz and {} Nm",
            cfg.cadence, cfg.peak_torque
        )));
    }
    let first = (WINDOW - 1) as f64 / SAMPLE_RATE;
    if !(cfg.duration > first) {
        return Err(Error::InvalidArgument(format!(
            "duration must exceed the first estimate at {first} s, got {}",
            cfg.duration
        )));
    }
    let profile = profile.clone().with_peak(cfg.peak_torque);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let stream = imu_stream(cfg.cadence, cfg.duration + 1.0 / SAMPLE_RATE, 0.0, cfg.noise, &mut rng)?;
    let estimates = estimate_stream(&stream, estimator)?;
    let refs: Vec<f64> = estimates
        .iter()
        .map(|p| profile_torque(&profile, *p))
        .collect::<Result<_>>()?;

    let refs = Arc::new(refs);
    let held = Arc::clone(&refs);
    let reference = signal(move |t| {
        // small bias so sample instants land on their own index
        let k = (t * SAMPLE_RATE + 1e-6).floor() as usize;
        match k.checked_sub(WINDOW - 1) {
            Some(i) => held[i.min(held.len() - 1)],
            None => 0.0,
        }
    });

    let motion = if cfg.still_hip {
        HipMotion { angle: zero_signal(), rate: zero_signal() }
    } else {
        stream_motion(cfg.cadence, stream.phase0)
    };
    let plant = Plant::new(
        spec.clone(),
        HumanParams::prescribed(motion),
        CouplingMode::PassiveBackdrive,
        false,
    )?;
    let mut cl = ClosedLoop::new(plant, *gains, reference)?;
    let dt = pick_dt(cl.fastest_rate(), DEFAULT_DT);
    let steps = steps_for(cfg.duration, dt)?;
    let per_sample = ((1.0 / SAMPLE_RATE) / dt).round() as usize;
    let n_out = cl.output_names().len();
    let tau_ref_idx = ClosedLoop::output_index("tau_ref").expect("loop output");

    let mut trace = TrackTrace::default();
    let (mut sum_sq, mut sum_sq_desired, mut count) = (0.0, 0.0, 0usize);
    let desired_at = |t: f64| {
        let p = (stream.phase0 + cfg.cadence * t).rem_euclid(1.0) * 100.0;
        profile_torque(&profile, if p >= 100.0 { 0.0 } else { p })
    };
    let mut failure = None;
    simulate(&mut cl, dt, steps, |k, t, _x, y| {
        debug_assert_eq!(y.len(), n_out);
        if t + 1e-12 < first {
            return;
        }
        let desired = match desired_at(t) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                return;
            }
        };
        let e = y[tau_ref_idx] - y[OUT_TAU_A];
        sum_sq += e * e;
        sum_sq_desired += (desired - y[OUT_TAU_A]).powi(2);
        count += 1;
        if per_sample > 0 && k % per_sample == 0 {
            let i = k / per_sample;
            trace.time.push(t);
            trace.phase_true.push(stream.phase[i] * 100.0);
            trace.phase_est.push(estimates[i + 1 - WINDOW]);
            trace.tau_desired.push(desired);
            trace.tau_ref.push(y[tau_ref_idx]);
            trace.tau_a.push(y[OUT_TAU_A]);
            trace.voltage.push(y[OUT_VOLTAGE]);
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let phase_sq: f64 = estimates
        .iter()
        .zip(&stream.phase[WINDOW - 1..])
        .map(|(e, p)| phase_error_pct(*e, p * 100.0).powi(2))
        .sum();
    let max_phase_jump = estimates.windows(2).map(|w| jump(w[0], w[1])).fold(0.0, f64::max);
    let rms_error = rms(sum_sq, count);
    Ok(TrackResult {
        rms_error,
        rms_pct: 100.0 * rms_error / cfg.peak_torque,
        rms_error_vs_desired: rms(sum_sq_desired, count),
        phase_rms_error: rms(phase_sq, estimates.len()),
        max_phase_jump,
        dt,
        trace,
    })
}
