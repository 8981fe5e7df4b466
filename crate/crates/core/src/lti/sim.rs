//! Fixed-step fourth-order Runge-Kutta integration.

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Exogenous time function.
pub type Signal = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

pub fn signal(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Signal {
    Arc::new(f)
}

pub fn zero_signal() -> Signal {
    Arc::new(|_| 0.0)
}

/// Stability margin enforced on `|lambda_max| * dt`.
pub const STEP_LIMIT: f64 = 0.1;

/// Default step when a system does not need a smaller one.
pub const DEFAULT_DT: f64 = 1e-4;

/// A continuous-time system with optional discrete (sample-and-hold) logic.
///
/// Exogenous inputs are owned by the implementor as time functions, so the
/// integrator can query them at the RK4 stage times.
pub trait System {
    fn state_names(&self) -> Vec<String>;

    fn output_names(&self) -> Vec<String>;

    fn initial_state(&self) -> Vec<f64>;

    /// Discrete update at the start of every step. Whatever it latches is held
    /// constant over the step.
    fn sample(&mut self, _t: f64, _x: &[f64], _dt: f64) {}

    fn derivatives(&self, t: f64, x: &[f64], dx: &mut [f64]);

    fn outputs(&self, t: f64, x: &[f64], y: &mut [f64]);

    /// Magnitude of the fastest eigenvalue (rad/s) of the system or of its
    /// linearization, if known.
    fn fastest_rate(&self) -> Option<f64> {
        None
    }
}

/// Largest step satisfying the stability check for a given eigenvalue magnitude.
pub fn max_stable_dt(rate: f64) -> f64 {
    if rate <= 0.0 {
        f64::INFINITY
    } else {
        STEP_LIMIT / rate
    }
}

/// Largest 1-2-5 sequence step no larger than `preferred` that passes the
/// stability check for `rate`.
pub fn pick_dt(rate: Option<f64>, preferred: f64) -> f64 {
    let limit = rate.map(max_stable_dt).unwrap_or(f64::INFINITY);
    if preferred < limit {
        return preferred;
    }
    let mut decade = 10f64.powf(limit.log10().floor());
    loop {
        for m in [5.0, 2.0, 1.0] {
            let dt = m * decade;
            if dt < limit && dt <= preferred {
                return dt;
            }
        }
        decade /= 10.0;
    }
}

pub fn check_step<S: System + ?Sized>(sys: &S, dt: f64) -> Result<()> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    if let Some(rate) = sys.fastest_rate() {
        let product = rate * dt;
        if product >= STEP_LIMIT {
            return Err(Error::StepTooLarge {
                dt,
                max_dt: max_stable_dt(rate),
                product,
            });
        }
    }
    Ok(())
}

struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }
}

fn rk4_step<S: System + ?Sized>(sys: &S, t: f64, dt: f64, x: &mut [f64], w: &mut Rk4Scratch) {
    let n = x.len();
    let h = 0.5 * dt;
    sys.derivatives(t, x, &mut w.k1);
    for i in 0..n {
        w.tmp[i] = x[i] + h * w.k1[i];
    }
    sys.derivatives(t + h, &w.tmp, &mut w.k2);
    for i in 0..n {
        w.tmp[i] = x[i] + h * w.k2[i];
    }
    sys.derivatives(t + h, &w.tmp, &mut w.k3);
    for i in 0..n {
        w.tmp[i] = x[i] + dt * w.k3[i];
    }
    sys.derivatives(t + dt, &w.tmp, &mut w.k4);
    for i in 0..n {
        x[i] += dt / 6.0 * (w.k1[i] + 2.0 * w.k2[i] + 2.0 * w.k3[i] + w.k4[i]);
    }
}

/// Run `steps` RK4 steps, calling `observe(k, t, x, y)` at each of the
/// `steps + 1` sample instants. Returns the final state.
pub fn simulate<S, F>(sys: &mut S, dt: f64, steps: usize, mut observe: F) -> Result<Vec<f64>>
where
    S: System + ?Sized,
    F: FnMut(usize, f64, &[f64], &[f64]),
{
    check_step(sys, dt)?;
    let mut x = sys.initial_state();
    let mut y = vec![0.0; sys.output_names().len()];
    let mut scratch = Rk4Scratch::new(x.len());
    for k in 0..=steps {
        let t = k as f64 * dt;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t, frequency: None });
        }
        sys.sample(t, &x, dt);
        sys.outputs(t, &x, &mut y);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { time: t, frequency: None });
        }
        observe(k, t, &x, &y);
        if k < steps {
            rk4_step(sys, t, dt, &mut x, &mut scratch);
        }
    }
    Ok(x)
}

pub fn steps_for(duration: f64, dt: f64) -> Result<usize> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "duration must be positive, got {duration}"
        )));
    }
    Ok((duration / dt).round() as usize)
}

/// Full state and output trajectory.
pub fn integrate<S: System + ?Sized>(sys: &mut S, dt: f64, duration: f64) -> Result<Trace> {
    integrate_decimated(sys, dt, duration, 1)
}

/// As [`integrate`] but keeps every `every`-th sample.
pub fn integrate_decimated<S: System + ?Sized>(
    sys: &mut S,
    dt: f64,
    duration: f64,
    every: usize,
) -> Result<Trace> {
    let every = every.max(1);
    let steps = steps_for(duration, dt)?;
    let mut names = vec!["t".to_string()];
    let states = sys.state_names();
    let outputs = sys.output_names();
    names.extend(states.iter().cloned());
    names.extend(outputs.iter().cloned());
    let cap = steps / every + 1;
    let mut data: Vec<Vec<f64>> = (0..names.len()).map(|_| Vec::with_capacity(cap)).collect();
    simulate(sys, dt, steps, |k, t, x, y| {
        if k % every == 0 {
            data[0].push(t);
            for (i, v) in x.iter().chain(y).enumerate() {
                data[i + 1].push(*v);
            }
        }
    })?;
    Trace::new(dt * every as f64, names, data)
}

/// Equal-length named time series sampled every `dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    dt: f64,
    names: Vec<String>,
    data: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(dt: f64, names: Vec<String>, data: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument(format!("trace dt must be positive, got {dt}")));
        }
        if names.len() != data.len() {
            return Err(Error::Dimension {
                expected: names.len(),
                got: data.len(),
            });
        }
        if let Some(first) = data.first() {
            if let Some(bad) = data.iter().find(|c| c.len() != first.len()) {
                return Err(Error::Dimension {
                    expected: first.len(),
                    got: bad.len(),
                });
            }
        }
        Ok(Self { dt, names, data })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.data[i].as_slice())
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.names.join(","))?;
        for row in 0..self.len() {
            let line: Vec<String> = self.data.iter().map(|c| fmt_sci(c[row])).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Ten significant digits in scientific notation.
pub fn fmt_sci(v: f64) -> String {
    format!("{v:.9e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Decay;

    impl System for Decay {
        fn state_names(&self) -> Vec<String> {
            vec!["x".into()]
        }
        fn output_names(&self) -> Vec<String> {
            vec![]
        }
        fn initial_state(&self) -> Vec<f64> {
            vec![1.0]
        }
        fn derivatives(&self, _t: f64, x: &[f64], dx: &mut [f64]) {
            dx[0] = -x[0];
        }
        fn outputs(&self, _t: f64, _x: &[f64], _y: &mut [f64]) {}
        fn fastest_rate(&self) -> Option<f64> {
            Some(1.0)
        }
    }

    #[test]
    fn rk4_decay_accuracy() {
        let tr = integrate(&mut Decay, 0.01, 1.0).unwrap();
        let x = tr.channel("x").unwrap();
        assert_eq!(x.len(), 101);
        assert!((x[100] - (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn step_check_rejects_large_dt() {
        assert!(matches!(
            integrate(&mut Decay, 0.2, 1.0),
            Err(Error::StepTooLarge { .. })
        ));
    }

    #[test]
    fn pick_dt_follows_sequence() {
        assert_eq!(pick_dt(None, 1e-4), 1e-4);
        assert_eq!(pick_dt(Some(100.0), 1e-4), 1e-4);
        let dt = pick_dt(Some(2465.0), 1e-4);
        assert!((dt - 2e-5).abs() < 1e-18, "{dt}");
        assert!(dt * 2465.0 < STEP_LIMIT);
    }

    #[test]
    fn csv_has_ten_significant_digits() {
        let tr = Trace::new(0.5, vec!["t".into(), "y".into()], vec![vec![0.0, 0.5], vec![1.0 / 3.0, 2.0]]).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("t,y\n"));
        assert!(s.contains("3.333333333e-1"));
    }

    #[test]
    fn ragged_trace_rejected() {
        assert!(Trace::new(1.0, vec!["a".into(), "b".into()], vec![vec![1.0], vec![]]).is_err());
    }
}
