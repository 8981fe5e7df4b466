//! Synthetic sagittal IMU data for training and exercising the phase estimator.
//!
//! Each thigh follows a two-harmonic hip-angle curve spanning 22.5 deg of
//! extension to 32.2 deg of flexion, with the right leg half a stride behind.
//! Per thigh the IMU reports pitch angle, pitch rate and the sagittal
//! acceleration `r * theta'' + g * sin(theta)` of a sensor `r` below the hip.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::Serialize;

use crate::error::{Error, Result};

pub const SAMPLE_RATE: f64 = 200.0;
pub const WINDOW: usize = 80;
/// Left/right x {angle, rate, acceleration}.
pub const CHANNELS: usize = 6;
pub const INPUTS: usize = CHANNELS * WINDOW;

pub const FLEXION_DEG: f64 = 32.2;
pub const EXTENSION_DEG: f64 = 22.5;
/// Sensor distance below the hip joint, m.
pub const SENSOR_RADIUS: f64 = 0.2;
pub const GRAVITY: f64 = 9.81;

/// Shape coefficients `(cos 2 pi p, sin 2 pi p, cos 4 pi p, sin 4 pi p)`.
const SHAPE: [f64; 4] = [1.0, 0.25, 0.2, -0.15];

/// Hip angle as a function of stride phase `p` in `[0, 1)`.
#[derive(Debug, Clone, Copy)]
pub struct HipCurve {
    offset: f64,
    gain: f64,
}

impl Default for HipCurve {
    fn default() -> Self {
        Self::new()
    }
}

impl HipCurve {
    /// Scale the shape so its extremes land exactly on the kinematic range.
    pub fn new() -> Self {
        let (lo, hi) = shape_extremes();
        let top = FLEXION_DEG.to_radians();
        let bottom = -EXTENSION_DEG.to_radians();
        let gain = (top - bottom) / (hi - lo);
        Self {
            offset: bottom - gain * lo,
            gain,
        }
    }

    /// rad
    pub fn angle(&self, p: f64) -> f64 {
        self.offset + self.gain * shape(p, 0)
    }

    /// d(angle)/dp, rad per stride.
    pub fn slope(&self, p: f64) -> f64 {
        self.gain * shape(p, 1)
    }

    /// d2(angle)/dp2, rad per stride^2.
    pub fn curvature(&self, p: f64) -> f64 {
        self.gain * shape(p, 2)
    }
}

/// `order`-th phase derivative of the unscaled shape.
fn shape(p: f64, order: u32) -> f64 {
    let mut acc = 0.0;
    for (h, (cs, sn)) in [(1.0, (SHAPE[0], SHAPE[1])), (2.0, (SHAPE[2], SHAPE[3]))] {
        let w = 2.0 * PI * h;
        let x = w * p;
        let (s, c) = x.sin_cos();
        acc += match order {
            0 => cs * c + sn * s,
            1 => w * (-cs * s + sn * c),
            _ => -w * w * (cs * c + sn * s),
        };
    }
    acc
}

fn shape_extremes() -> (f64, f64) {
    // refine grid extremes with Newton on the derivative
    let n = 4096;
    let refine = |mut p: f64| {
        for _ in 0..30 {
            let step = shape(p, 1) / shape(p, 2);
            p -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        shape(p, 0)
    };
    let (mut imin, mut imax) = (0, 0);
    let v: Vec<f64> = (0..n).map(|i| shape(i as f64 / n as f64, 0)).collect();
    for i in 0..n {
        if v[i] < v[imin] {
            imin = i;
        }
        if v[i] > v[imax] {
            imax = i;
        }
    }
    (refine(imin as f64 / n as f64), refine(imax as f64 / n as f64))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GaitConfig {
    /// Stride frequencies, Hz.
    pub cadences: Vec<f64>,
    /// Cadences withheld from training.
    pub held_out: Vec<f64>,
    pub strides_per_speed: usize,
    /// Noise standard deviation as a fraction of each clean channel's RMS.
    pub noise: f64,
    /// Samples between consecutive training windows.
    pub hop: usize,
    pub seed: u64,
}

impl Default for GaitConfig {
    fn default() -> Self {
        Self {
            cadences: vec![0.80, 0.875, 0.95, 1.025, 1.10],
            held_out: vec![0.95],
            strides_per_speed: 15,
            noise: 0.02,
            hop: 4,
            seed: 7,
        }
    }
}

/// One continuous IMU recording at a fixed cadence.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuStream {
    pub cadence: f64,
    /// Channel-major samples, `CHANNELS` rows.
    pub channels: Vec<Vec<f64>>,
    /// Ground-truth stride phase of the left leg, `[0, 1)`.
    pub phase: Vec<f64>,
    /// Clean left hip angle, rad.
    pub hip_angle: Vec<f64>,
    /// Phase at `t = 0`.
    pub phase0: f64,
}

impl ImuStream {
    pub fn len(&self) -> usize {
        self.phase.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phase.is_empty()
    }

    /// Raw window ending at sample `end` (inclusive), channel-major.
    pub fn window(&self, end: usize) -> Option<Vec<f64>> {
        if end + 1 < WINDOW || end >= self.len() {
            return None;
        }
        let start = end + 1 - WINDOW;
        let mut out = Vec::with_capacity(INPUTS);
        for ch in &self.channels {
            out.extend_from_slice(&ch[start..=end]);
        }
        Some(out)
    }
}

/// Signals of one leg at phase `p` and cadence `f`: angle, rate, acceleration.
pub fn leg_signals(curve: &HipCurve, p: f64, f: f64) -> [f64; 3] {
    let th = curve.angle(p);
    let rate = curve.slope(p) * f;
    let acc = SENSOR_RADIUS * curve.curvature(p) * f * f + GRAVITY * th.sin();
    [th, rate, acc]
}

/// Record `duration` seconds at cadence `f` starting from phase `phase0`.
pub fn imu_stream(f: f64, duration: f64, phase0: f64, noise: f64, rng: &mut ChaCha8Rng) -> Result<ImuStream> {
    if !(f > 0.0) || !(duration > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "cadence and duration must be positive, got {f} Hz and {duration} s"
        )));
    }
    let curve = HipCurve::new();
    let n = (duration * SAMPLE_RATE).ceil() as usize;
    let mut channels: Vec<Vec<f64>> = (0..CHANNELS).map(|_| Vec::with_capacity(n)).collect();
    let mut phase = Vec::with_capacity(n);
    let mut hip_angle = Vec::with_capacity(n);
    for k in 0..n {
        let t = k as f64 / SAMPLE_RATE;
        let p = (phase0 + f * t).rem_euclid(1.0);
        let left = leg_signals(&curve, p, f);
        let right = leg_signals(&curve, (p + 0.5).rem_euclid(1.0), f);
        for (c, v) in left.iter().chain(right.iter()).enumerate() {
            channels[c].push(*v);
        }
        phase.push(p);
        hip_angle.push(left[0]);
    }
    if noise > 0.0 {
        for ch in channels.iter_mut() {
            let rms = (ch.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
            let dist = Normal::new(0.0, noise * rms).map_err(|e| Error::InvalidArgument(e.to_string()))?;
            for v in ch.iter_mut() {
                *v += dist.sample(rng);
            }
        }
    } else if noise < 0.0 {
        return Err(Error::InvalidArgument(format!("noise must be non-negative, got {noise}")));
    }
    Ok(ImuStream {
        cadence: f,
        channels,
        phase,
        hip_angle,
        phase0,
    })
}

/// Raw window with its label.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub features: Vec<f64>,
    /// Phase at the window's last sample, `[0, 1)`.
    pub phase: f64,
    pub cadence: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaitDataset {
    pub train: Vec<Sample>,
    pub test: Vec<Sample>,
    pub cadences: Vec<f64>,
    pub train_cadences: Vec<f64>,
    pub test_cadences: Vec<f64>,
}

/// Windows never span two cadences because every cadence is its own stream.
pub fn synthesize_gait(cfg: &GaitConfig) -> Result<GaitDataset> {
    if cfg.cadences.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "gait synthesis needs at least 2 cadences, got {}",
            cfg.cadences.len()
        )));
    }
    if cfg.strides_per_speed < 10 {
        return Err(Error::InvalidArgument(format!(
            "need at least 10 strides per cadence, got {}",
            cfg.strides_per_speed
        )));
    }
    if cfg.hop == 0 {
        return Err(Error::InvalidArgument("window hop must be at least 1".into()));
    }
    let is_held = |c: f64| cfg.held_out.iter().any(|h| (h - c).abs() < 1e-12);
    if cfg.held_out.iter().any(|h| !cfg.cadences.iter().any(|c| (h - c).abs() < 1e-12)) {
        return Err(Error::InvalidArgument("held-out cadences must be among the cadences".into()));
    }
    if cfg.cadences.iter().all(|c| is_held(*c)) || cfg.held_out.is_empty() {
        return Err(Error::InvalidArgument(
            "need at least one training and one held-out cadence".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Uniform::new(0.0, 1.0);
    let mut ds = GaitDataset {
        train: Vec::new(),
        test: Vec::new(),
        cadences: cfg.cadences.clone(),
        train_cadences: Vec::new(),
        test_cadences: Vec::new(),
    };
    for &f in &cfg.cadences {
        let phase0 = start.sample(&mut rng);
        let stream = imu_stream(f, cfg.strides_per_speed as f64 / f, phase0, cfg.noise, &mut rng)?;
        let held = is_held(f);
        let out = if held { &mut ds.test } else { &mut ds.train };
        let mut end = WINDOW - 1;
        while let Some(features) = stream.window(end) {
            out.push(Sample {
                features,
                phase: stream.phase[end],
                cadence: f,
            });
            end += cfg.hop;
        }
        if held {
            ds.test_cadences.push(f);
        } else {
            ds.train_cadences.push(f);
        }
    }
    Ok(ds)
}
