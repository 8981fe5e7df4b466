//! Test-signal generators.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear-in-time frequency sweep `A sin(2 pi (f0 t + (f1 - f0) t^2 / (2 T)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChirpSpec {
    /// Hz
    pub f0: f64,
    /// Hz
    pub f1: f64,
    pub amplitude: f64,
    /// s
    pub duration: f64,
}

impl ChirpSpec {
    pub fn new(f0: f64, f1: f64, amplitude: f64, duration: f64) -> Result<Self> {
        let spec = Self {
            f0,
            f1,
            amplitude,
            duration,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.f0, self.f1, self.amplitude, self.duration]
            .iter()
            .all(|v| v.is_finite());
        if !finite || !(self.f0 >= 0.0) || self.f1 < self.f0 {
            return Err(Error::InvalidArgument(format!(
                "chirp needs f1 >= f0 >= 0, got f0={} f1={}",
                self.f0, self.f1
            )));
        }
        if !(self.amplitude > 0.0) || !(self.duration > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "chirp needs amplitude > 0 and duration > 0, got {} and {}",
                self.amplitude, self.duration
            )));
        }
        Ok(())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0 && t <= self.duration) {
            return Err(Error::OutOfRange {
                what: "chirp time",
                value: t,
                min: 0.0,
                max: self.duration,
            });
        }
        Ok(())
    }

    /// Phase in radians.
    pub fn phase(&self, t: f64) -> f64 {
        2.0 * PI * (self.f0 * t + (self.f1 - self.f0) * t * t / (2.0 * self.duration))
    }

    /// Instantaneous frequency in Hz.
    pub fn frequency(&self, t: f64) -> f64 {
        self.f0 + (self.f1 - self.f0) * t / self.duration
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.amplitude * self.phase(t).sin())
    }

    /// Time derivative of [`value`](Self::value).
    pub fn rate(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.amplitude * 2.0 * PI * self.frequency(t) * self.phase(t).cos())
    }

    /// Value clamped to the sweep window; zero outside it.
    pub fn value_or_zero(&self, t: f64) -> f64 {
        self.value(t).unwrap_or(0.0)
    }

    pub fn rate_or_zero(&self, t: f64) -> f64 {
        self.rate(t).unwrap_or(0.0)
    }
}

pub fn chirp_value(spec: &ChirpSpec, t: f64) -> Result<f64> {
    spec.value(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_at_zero() {
        let c = ChirpSpec::new(3.0, 7.0, 2.0, 4.0).unwrap();
        assert_eq!(c.value(0.0).unwrap(), 0.0);
    }

    #[test]
    fn terminal_frequency_is_f1() {
        let c = ChirpSpec::new(0.0, 100.0, 5.0, 10.0).unwrap();
        assert!((c.frequency(10.0) - 100.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_window_rejected() {
        let c = ChirpSpec::new(0.0, 1.0, 1.0, 2.0).unwrap();
        assert!(matches!(c.value(2.5), Err(Error::OutOfRange { .. })));
        assert!(c.value(-0.1).is_err());
        assert_eq!(c.value_or_zero(3.0), 0.0);
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(ChirpSpec::new(2.0, 1.0, 1.0, 1.0).is_err());
        assert!(ChirpSpec::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(ChirpSpec::new(0.0, 1.0, 1.0, 0.0).is_err());
        assert!(ChirpSpec::new(-1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn backdrive_drive_peaks_at_ten_degrees() {
        let amp = 10f64.to_radians();
        let c = ChirpSpec::new(0.0, 1.0, amp, 20.0).unwrap();
        let peak = (0..=200_000)
            .map(|k| c.value(k as f64 * 1e-4).unwrap().abs())
            .fold(0.0, f64::max);
        assert!(peak <= amp);
        assert!((peak - amp).abs() < 1e-6 * amp);
    }
}
