//! Gait-phase regression network: 480 standardized IMU inputs, one sigmoid
//! hidden layer of 30 units and two linear outputs `(sin phi, cos phi)`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::Serialize;

use super::gait::{GaitDataset, Sample, CHANNELS, INPUTS, WINDOW};
use crate::error::{Error, Result};

pub const HIDDEN: usize = 30;
pub const OUTPUTS: usize = 2;
/// Standard deviations below this are degenerate.
pub const STD_FLOOR: f64 = 1e-9;

const FILE_MAGIC: &str = "exosim-phase-estimator";
const FILE_VERSION: u32 = 1;

/// Per-channel statistics of the training windows.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    pub fn identity() -> Self {
        Self {
            mean: vec![0.0; CHANNELS],
            std: vec![1.0; CHANNELS],
        }
    }

    /// Mean and population standard deviation of every channel over all
    /// samples of all windows.
    pub fn fit(samples: &[Sample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidArgument("cannot fit statistics to no data".into()));
        }
        let mut mean = vec![0.0; CHANNELS];
        let mut std = vec![0.0; CHANNELS];
        let count = (samples.len() * WINDOW) as f64;
        for s in samples {
            check_len(&s.features)?;
            for c in 0..CHANNELS {
                mean[c] += s.features[c * WINDOW..(c + 1) * WINDOW].iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        for s in samples {
            for c in 0..CHANNELS {
                std[c] += s.features[c * WINDOW..(c + 1) * WINDOW]
                    .iter()
                    .map(|v| (v - mean[c]).powi(2))
                    .sum::<f64>();
            }
        }
        for (c, sd) in std.iter_mut().enumerate() {
            *sd = (*sd / count).sqrt();
            if *sd < STD_FLOOR {
                return Err(Error::DegenerateChannel { channel: c, std: *sd });
            }
        }
        Ok(Self { mean, std })
    }
}

fn check_len(x: &[f64]) -> Result<()> {
    if x.len() != INPUTS {
        return Err(Error::Dimension {
            expected: INPUTS,
            got: x.len(),
        });
    }
    Ok(())
}

/// `(x - mean) / std` per channel. The flag reports whether any standard
/// deviation had to be floored at [`STD_FLOOR`].
pub fn standardize(window: &[f64], stats: &Normalization) -> Result<(Vec<f64>, bool)> {
    check_len(window)?;
    let mut floored = false;
    let mut out = Vec::with_capacity(INPUTS);
    for c in 0..CHANNELS {
        let sd = if stats.std[c] < STD_FLOOR {
            floored = true;
            STD_FLOOR
        } else {
            stats.std[c]
        };
        out.extend(window[c * WINDOW..(c + 1) * WINDOW].iter().map(|v| (v - stats.mean[c]) / sd));
    }
    Ok((out, floored))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseEstimator {
    /// `HIDDEN x INPUTS`, row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// `OUTPUTS x HIDDEN`, row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub norm: Normalization,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseOutput {
    /// `[0, 100)`
    pub phase_pct: f64,
    pub sin: f64,
    pub cos: f64,
}

/// Xavier-uniform weights, zero biases, identity normalization.
pub fn mlp_init(seed: u64) -> PhaseEstimator {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layer = |fan_in: usize, fan_out: usize| -> Vec<f64> {
        let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound);
        (0..fan_in * fan_out).map(|_| dist.sample(&mut rng)).collect()
    };
    let w1 = layer(INPUTS, HIDDEN);
    let w2 = layer(HIDDEN, OUTPUTS);
    PhaseEstimator {
        w1,
        b1: vec![0.0; HIDDEN],
        w2,
        b2: vec![0.0; OUTPUTS],
        norm: Normalization::identity(),
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Map `(sin, cos)` to percent; `(0, 0)` maps to 0.
pub fn phase_from_outputs(sin: f64, cos: f64) -> f64 {
    if sin == 0.0 && cos == 0.0 {
        return 0.0;
    }
    let pct = sin.atan2(cos).rem_euclid(2.0 * PI) / (2.0 * PI) * 100.0;
    if pct >= 100.0 {
        0.0
    } else {
        pct
    }
}

impl PhaseEstimator {
    fn hidden(&self, x: &[f64], h: &mut [f64; HIDDEN]) {
        for (j, hj) in h.iter_mut().enumerate() {
            let row = &self.w1[j * INPUTS..(j + 1) * INPUTS];
            let z: f64 = row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[j];
            *hj = sigmoid(z);
        }
    }

    fn output(&self, h: &[f64; HIDDEN]) -> [f64; OUTPUTS] {
        let mut o = [0.0; OUTPUTS];
        for (k, ok) in o.iter_mut().enumerate() {
            let row = &self.w2[k * HIDDEN..(k + 1) * HIDDEN];
            *ok = row.iter().zip(h).map(|(w, v)| w * v).sum::<f64>() + self.b2[k];
        }
        o
    }

    /// Forward pass on an already standardized feature vector.
    pub fn forward_features(&self, features: &[f64]) -> Result<PhaseOutput> {
        check_len(features)?;
        let mut h = [0.0; HIDDEN];
        self.hidden(features, &mut h);
        let [sin, cos] = self.output(&h);
        Ok(PhaseOutput {
            phase_pct: phase_from_outputs(sin, cos),
            sin,
            cos,
        })
    }

    /// Standardize a raw window with the stored statistics, then run forward.
    pub fn estimate(&self, window: &[f64]) -> Result<PhaseOutput> {
        let (x, _) = standardize(window, &self.norm)?;
        self.forward_features(&x)
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// All trainable parameters in file order: w1, b1, w2, b2.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend_from_slice(&self.w1);
        p.extend_from_slice(&self.b1);
        p.extend_from_slice(&self.w2);
        p.extend_from_slice(&self.b2);
        p
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(HIDDEN);
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
    }

    fn params_mut(&mut self) -> [&mut [f64]; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    /// Versioned text file: header, layer sizes, normalization, then
    /// row-major parameters. Floats use shortest round-trip formatting.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let line = |s: &mut String, key: &str, v: &[f64]| {
            s.push_str(key);
            for x in v {
                write!(s, " {x:e}").unwrap();
            }
            s.push('\n');
        };
        writeln!(s, "{FILE_MAGIC} {FILE_VERSION}").unwrap();
        writeln!(s, "layers {INPUTS} {HIDDEN} {OUTPUTS}").unwrap();
        writeln!(s, "window {CHANNELS} {WINDOW}").unwrap();
        line(&mut s, "mean", &self.norm.mean);
        line(&mut s, "std", &self.norm.std);
        line(&mut s, "w1", &self.w1);
        line(&mut s, "b1", &self.b1);
        line(&mut s, "w2", &self.w2);
        line(&mut s, "b2", &self.b2);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Schema(format!("phase estimator file: {msg}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
        if header != format!("{FILE_MAGIC} {FILE_VERSION}") {
            return Err(bad(format!("unsupported header {header:?}")));
        }
        let mut ints = |key: &str, expect: &[usize]| -> Result<()> {
            let l = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(bad(format!("expected {key} line, got {l:?}")));
            }
            let got: Vec<usize> = it.map(|v| v.parse().map_err(|_| bad(format!("bad integer in {l:?}")))).collect::<Result<_>>()?;
            if got != expect {
                return Err(bad(format!("{key} {got:?} does not match {expect:?}")));
            }
            Ok(())
        };
        ints("layers", &[INPUTS, HIDDEN, OUTPUTS])?;
        ints("window", &[CHANNELS, WINDOW])?;
        let mut floats = |key: &str, n: usize| -> Result<Vec<f64>> {
            let l = lines.next().ok_or_else(|| bad(format!("missing {key}")))?;
            let mut it = l.split_whitespace();
            if it.next() != Some(key) {
                return Err(bad(format!("expected {key} line")));
            }
            let v: Vec<f64> = it.map(|v| v.parse().map_err(|_| bad(format!("bad number in {key}")))).collect::<Result<_>>()?;
            if v.len() != n {
                return Err(Error::Dimension { expected: n, got: v.len() });
            }
            Ok(v)
        };
        let mean = floats("mean", CHANNELS)?;
        let std = floats("std", CHANNELS)?;
        if std.iter().any(|s| !(*s > 0.0)) {
            return Err(bad("standard deviations must be positive".into()));
        }
        Ok(Self {
            norm: Normalization { mean, std },
            w1: floats("w1", HIDDEN * INPUTS)?,
            b1: floats("b1", HIDDEN)?,
            w2: floats("w2", OUTPUTS * HIDDEN)?,
            b2: floats("b2", OUTPUTS)?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("phase estimator {}: {e}", path.display())))?;
        Self::from_text(&text)
    }
}

pub fn mlp_forward(est: &PhaseEstimator, features: &[f64]) -> Result<PhaseOutput> {
    est.forward_features(features)
}

/// `(sin, cos)` of the phase angle.
pub fn phase_target(phase: f64) -> [f64; OUTPUTS] {
    let a = 2.0 * PI * phase;
    [a.sin(), a.cos()]
}

/// Parameter gradient in [`PhaseEstimator::params`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradient {
    fn zeros() -> Self {
        Self {
            w1: vec![0.0; HIDDEN * INPUTS],
            b1: vec![0.0; HIDDEN],
            w2: vec![0.0; OUTPUTS * HIDDEN],
            b2: vec![0.0; OUTPUTS],
        }
    }

    fn parts(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.parts().concat()
    }
}

/// Loss `1/B * sum_b 1/2 |o_b - t_b|^2` over a batch of standardized inputs.
pub fn batch_loss(est: &PhaseEstimator, xs: &[&[f64]], targets: &[[f64; OUTPUTS]]) -> f64 {
    let mut h = [0.0; HIDDEN];
    let mut total = 0.0;
    for (x, t) in xs.iter().zip(targets) {
        est.hidden(x, &mut h);
        let o = est.output(&h);
        total += 0.5 * o.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    }
    total / xs.len() as f64
}

/// Loss and its gradient by backpropagation.
pub fn backprop(est: &PhaseEstimator, xs: &[&[f64]], targets: &[[f64; OUTPUTS]]) -> (f64, Gradient) {
    let mut g = Gradient::zeros();
    let mut loss = 0.0;
    let scale = 1.0 / xs.len() as f64;
    let mut h = [0.0; HIDDEN];
    for (x, t) in xs.iter().zip(targets) {
        est.hidden(x, &mut h);
        let o = est.output(&h);
        let mut d_o = [0.0; OUTPUTS];
        for k in 0..OUTPUTS {
            let e = o[k] - t[k];
            loss += 0.5 * e * e;
            d_o[k] = e * scale;
        }
        let mut d_h = [0.0; HIDDEN];
        for k in 0..OUTPUTS {
            g.b2[k] += d_o[k];
            for j in 0..HIDDEN {
                g.w2[k * HIDDEN + j] += d_o[k] * h[j];
                d_h[j] += d_o[k] * est.w2[k * HIDDEN + j];
            }
        }
        for j in 0..HIDDEN {
            let d_z = d_h[j] * h[j] * (1.0 - h[j]);
            g.b1[j] += d_z;
            let row = &mut g.w1[j * INPUTS..(j + 1) * INPUTS];
            for (gw, xi) in row.iter_mut().zip(x.iter()) {
                *gw += d_z * xi;
            }
        }
    }
    (loss * scale, g)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: 64,
            seed: 11,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub estimator: PhaseEstimator,
    /// Training-set loss before the first update.
    pub initial_loss: f64,
    /// Training-set loss after each epoch.
    pub loss_history: Vec<f64>,
    pub train_r2: f64,
    pub test_r2: f64,
}

/// Plain mini-batch gradient descent on the `(sin, cos)` regression loss.
/// Normalization statistics come from the training split only.
pub fn mlp_train(dataset: &GaitDataset, cfg: &TrainConfig) -> Result<TrainOutcome> {
    if dataset.train.is_empty() || dataset.test.is_empty() {
        return Err(Error::InvalidArgument("training and test splits must be non-empty".into()));
    }
    if dataset.train_cadences.iter().any(|c| dataset.test_cadences.contains(c)) {
        return Err(Error::InvalidArgument("train and test cadences overlap".into()));
    }
    if cfg.batch_size == 0 || cfg.epochs == 0 || !(cfg.learning_rate >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "invalid training settings: {} epochs, batch {}, rate {}",
            cfg.epochs, cfg.batch_size, cfg.learning_rate
        )));
    }
    let norm = Normalization::fit(&dataset.train)?;
    let standardized = |set: &[Sample]| -> Result<Vec<Vec<f64>>> {
        set.iter().map(|s| standardize(&s.features, &norm).map(|(x, _)| x)).collect()
    };
    let train_x = standardized(&dataset.train)?;
    let train_t: Vec<[f64; OUTPUTS]> = dataset.train.iter().map(|s| phase_target(s.phase)).collect();
    let all_x: Vec<&[f64]> = train_x.iter().map(|v| v.as_slice()).collect();

    let mut est = mlp_init(cfg.seed);
    est.norm = norm;
    let initial_loss = batch_loss(&est, &all_x, &train_t);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut order: Vec<usize> = (0..train_x.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut xs: Vec<&[f64]> = Vec::with_capacity(cfg.batch_size);
    let mut ts: Vec<[f64; OUTPUTS]> = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            xs.clear();
            ts.clear();
            for &i in chunk {
                xs.push(&train_x[i]);
                ts.push(train_t[i]);
            }
            let (loss, g) = backprop(&est, &xs, &ts);
            if !loss.is_finite() {
                return Err(Error::TrainingDivergence { epoch });
            }
            for (p_block, g_block) in est.params_mut().into_iter().zip(g.parts()) {
                for (p, gi) in p_block.iter_mut().zip(g_block) {
                    *p -= cfg.learning_rate * gi;
                }
            }
        }
        let loss = batch_loss(&est, &all_x, &train_t);
        if !loss.is_finite() {
            return Err(Error::TrainingDivergence { epoch });
        }
        history.push(loss);
    }

    let train_r2 = phase_r2(&est, &dataset.train)?;
    let test_r2 = phase_r2(&est, &dataset.test)?;
    Ok(TrainOutcome {
        estimator: est,
        initial_loss,
        loss_history: history,
        train_r2,
        test_r2,
    })
}

/// Signed phase difference wrapped to `[-50, 50)` percent.
pub fn phase_error_pct(estimate: f64, truth: f64) -> f64 {
    (estimate - truth + 50.0).rem_euclid(100.0) - 50.0
}

/// Coefficient of determination of the phase estimate in percent, with
/// residuals measured around the circle so the 100 -> 0 wrap is not an error.
pub fn phase_r2(est: &PhaseEstimator, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no samples".into()));
    }
    let truth: Vec<f64> = samples.iter().map(|s| s.phase * 100.0).collect();
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (s, t) in samples.iter().zip(&truth) {
        let p = est.estimate(&s.features)?.phase_pct;
        ss_res += phase_error_pct(p, *t).powi(2);
        ss_tot += (t - mean).powi(2);
    }
    Ok(1.0 - ss_res / ss_tot)
}
