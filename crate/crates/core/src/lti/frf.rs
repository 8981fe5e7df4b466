//! Frequency responses: analytic evaluation, stepped-sine measurement and
//! -3 dB bandwidth detection.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::io::Write;

use super::sim::{self, fmt_sci, Signal, System, DEFAULT_DT};
use super::ss::LinearSystem;
use super::tf::TransferFunction;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyResponse {
    freqs: Vec<f64>,
    magnitude: Vec<f64>,
    phase: Vec<f64>,
}

impl FrequencyResponse {
    pub fn new(freqs: Vec<f64>, magnitude: Vec<f64>, phase: Vec<f64>) -> Result<Self> {
        if magnitude.len() != freqs.len() || phase.len() != freqs.len() {
            return Err(Error::Dimension {
                expected: freqs.len(),
                got: magnitude.len().min(phase.len()),
            });
        }
        check_grid(&freqs)?;
        Ok(Self {
            freqs,
            magnitude,
            phase,
        })
    }

    /// Exact evaluation of a transfer function on a grid of Hz values.
    pub fn analytic(tf: &TransferFunction, freqs: &[f64]) -> Result<Self> {
        check_grid(freqs)?;
        let mut magnitude = Vec::with_capacity(freqs.len());
        let mut phase = Vec::with_capacity(freqs.len());
        for f in freqs {
            let g = tf.freq_response_at(2.0 * PI * f)?;
            magnitude.push(g.norm());
            phase.push(g.arg());
        }
        Ok(Self {
            freqs: freqs.to_vec(),
            magnitude,
            phase,
        })
    }

    pub fn freqs(&self) -> &[f64] {
        &self.freqs
    }

    pub fn magnitude(&self) -> &[f64] {
        &self.magnitude
    }

    /// Radians.
    pub fn phase(&self) -> &[f64] {
        &self.phase
    }

    pub fn len(&self) -> usize {
        self.freqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.freqs.is_empty()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "freq_hz,magnitude,magnitude_db,phase_rad")?;
        for i in 0..self.len() {
            writeln!(
                w,
                "{},{},{},{}",
                fmt_sci(self.freqs[i]),
                fmt_sci(self.magnitude[i]),
                fmt_sci(20.0 * self.magnitude[i].log10()),
                fmt_sci(self.phase[i])
            )?;
        }
        Ok(())
    }
}

fn check_grid(freqs: &[f64]) -> Result<()> {
    if freqs.iter().any(|f| !(*f > 0.0) || !f.is_finite()) {
        return Err(Error::InvalidArgument("frequencies must be positive".into()));
    }
    if freqs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "frequencies must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

/// Lowest frequency where the magnitude first drops below `dc_gain / sqrt(2)`,
/// linearly interpolated between the bracketing samples.
///
/// `Ok(None)` means the response never crosses inside the grid. A response that
/// is already below the threshold at the first sample reports the first grid
/// frequency.
pub fn bandwidth_3db(frf: &FrequencyResponse, dc_gain: f64) -> Result<Option<f64>> {
    if !(dc_gain > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "dc gain must be positive, got {dc_gain}"
        )));
    }
    if frf.is_empty() {
        return Err(Error::InvalidArgument("empty frequency response".into()));
    }
    let level = dc_gain * FRAC_1_SQRT_2;
    let m = frf.magnitude();
    let f = frf.freqs();
    let Some(i) = m.iter().position(|v| *v < level) else {
        return Ok(None);
    };
    if i == 0 {
        return Ok(Some(f[0]));
    }
    let frac = (m[i - 1] - level) / (m[i - 1] - m[i]);
    Ok(Some(f[i - 1] + frac * (f[i] - f[i - 1])))
}

/// A single-input system whose response to a sinusoid can be measured.
pub trait SineProbe {
    type Driven: System;

    /// The system with `input` wired to its probed input.
    fn drive(&self, input: Signal) -> Self::Driven;

    /// Index of the measured channel in the driven system's outputs.
    fn output_index(&self) -> usize;

    /// Minimum time to discard before measuring, in seconds.
    fn settle_time(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteppedSine {
    pub settle_cycles: usize,
    pub measure_cycles: usize,
    /// Upper bound on the integration step; the actual step divides each
    /// period into a whole number of samples. `None` picks from the system's
    /// fastest eigenvalue.
    pub max_dt: Option<f64>,
}

impl Default for SteppedSine {
    fn default() -> Self {
        Self {
            settle_cycles: 3,
            measure_cycles: 5,
            max_dt: None,
        }
    }
}

/// Amplitude and phase of the drive-frequency component of one response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinePoint {
    pub magnitude: f64,
    pub phase: f64,
}

pub fn measure_point<P: SineProbe>(
    probe: &P,
    freq: f64,
    amplitude: f64,
    opts: &SteppedSine,
) -> Result<SinePoint> {
    if !(amplitude != 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "probe amplitude must be nonzero, got {amplitude}"
        )));
    }
    if !(freq > 0.0) {
        return Err(Error::InvalidArgument(format!("frequency must be positive, got {freq}")));
    }
    let omega = 2.0 * PI * freq;
    let input: Signal = std::sync::Arc::new(move |t| amplitude * (omega * t).sin());
    let mut sys = probe.drive(input);

    let dt_cap = opts
        .max_dt
        .unwrap_or_else(|| sim::pick_dt(sys.fastest_rate(), DEFAULT_DT));
    let period = 1.0 / freq;
    let per_cycle = (period / dt_cap).ceil().max(8.0) as usize;
    let dt = period / per_cycle as f64;
    let settle = opts
        .settle_cycles
        .max((probe.settle_time() / period).ceil() as usize);
    let measure = opts.measure_cycles.max(1);
    let start = settle * per_cycle;
    let steps = (settle + measure) * per_cycle;
    let idx = probe.output_index();

    let (mut s_acc, mut c_acc) = (0.0, 0.0);
    let res = sim::simulate(&mut sys, dt, steps, |k, _t, _x, y| {
        if k >= start && k < steps {
            // phase from the sample index keeps the window exactly periodic
            let ph = 2.0 * PI * ((k % per_cycle) as f64 / per_cycle as f64);
            s_acc += y[idx] * ph.sin();
            c_acc += y[idx] * ph.cos();
        }
    });
    match res {
        Err(Error::Divergence { time, .. }) => {
            return Err(Error::Divergence {
                time,
                frequency: Some(freq),
            })
        }
        Err(e) => return Err(e),
        Ok(_) => {}
    }
    let n = (steps - start) as f64;
    let a = 2.0 * s_acc / n;
    let b = 2.0 * c_acc / n;
    Ok(SinePoint {
        magnitude: a.hypot(b) / amplitude.abs(),
        phase: b.atan2(a) + if amplitude < 0.0 { PI } else { 0.0 },
    })
}

/// Stepped-sine frequency response: per frequency, discard the settling
/// cycles, then correlate the measured channel against the drive over the
/// measurement cycles.
pub fn measure_frf<P: SineProbe>(
    probe: &P,
    freqs: &[f64],
    amplitude: f64,
    opts: &SteppedSine,
) -> Result<FrequencyResponse> {
    if !(amplitude != 0.0) {
        return Err(Error::InvalidArgument("probe amplitude must be nonzero".into()));
    }
    check_grid(freqs)?;
    let mut magnitude = Vec::with_capacity(freqs.len());
    let mut phase = Vec::with_capacity(freqs.len());
    for f in freqs {
        let p = measure_point(probe, *f, amplitude, opts)?;
        magnitude.push(p.magnitude);
        phase.push(wrap_pi(p.phase));
    }
    FrequencyResponse::new(freqs.to_vec(), magnitude, phase)
}

/// Linear transfer functions are probed through their canonical realization.
/// Settling waits seven time constants of the slowest pole.
impl SineProbe for TransferFunction {
    type Driven = LinearSystem;

    fn drive(&self, input: Signal) -> LinearSystem {
        let ss = self
            .to_state_space()
            .expect("only proper transfer functions can be probed");
        LinearSystem::new(ss, vec![input]).expect("SISO realization")
    }

    fn output_index(&self) -> usize {
        0
    }

    fn settle_time(&self) -> f64 {
        slowest_time_constant(self).map_or(0.0, |tau| 7.0 * tau)
    }
}

/// `1 / min |Re(p)|` over the poles, if every pole is strictly stable.
pub fn slowest_time_constant(tf: &TransferFunction) -> Option<f64> {
    let poles = tf.poles().ok()?;
    let slowest = poles.iter().map(|p| -p.re).fold(f64::INFINITY, f64::min);
    (slowest > 0.0 && slowest.is_finite()).then(|| 1.0 / slowest)
}

pub fn wrap_pi(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y == -PI {
        PI
    } else {
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_order_frf(freqs: &[f64]) -> FrequencyResponse {
        let tf = TransferFunction::new(&[1.0], &[1.0, 1.0]).unwrap();
        FrequencyResponse::analytic(&tf, freqs).unwrap()
    }

    #[test]
    fn first_order_bandwidth() {
        let frf = first_order_frf(&log_space(0.001, 10.0, 2000));
        let bw = bandwidth_3db(&frf, 1.0).unwrap().unwrap();
        let expect = 1.0 / (2.0 * PI);
        assert!((bw - expect).abs() < 0.01 * expect, "{bw}");
    }

    #[test]
    fn flat_response_has_no_crossing() {
        let f = log_space(1.0, 100.0, 20);
        let frf = FrequencyResponse::new(f.clone(), vec![1.0; 20], vec![0.0; 20]).unwrap();
        assert_eq!(bandwidth_3db(&frf, 1.0).unwrap(), None);
    }

    #[test]
    fn non_positive_dc_gain_rejected() {
        let frf = first_order_frf(&[1.0, 2.0]);
        assert!(matches!(bandwidth_3db(&frf, 0.0), Err(Error::InvalidArgument(_))));
        assert!(bandwidth_3db(&frf, -1.0).is_err());
    }

    #[test]
    fn grid_must_be_increasing() {
        assert!(FrequencyResponse::new(vec![2.0, 1.0], vec![1.0; 2], vec![0.0; 2]).is_err());
        assert!(FrequencyResponse::new(vec![0.0, 1.0], vec![1.0; 2], vec![0.0; 2]).is_err());
    }

    #[test]
    fn log_space_endpoints() {
        let f = log_space(0.5, 100.0, 40);
        assert_eq!(f.len(), 40);
        assert_eq!(f[0], 0.5);
        assert_eq!(f[39], 100.0);
    }

    #[test]
    fn wraps_phase() {
        assert!((wrap_pi(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
        assert_eq!(wrap_pi(PI), PI);
    }
}
