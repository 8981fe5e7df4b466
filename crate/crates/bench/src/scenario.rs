//! Scenario files: TOML with unit-suffixed quantities, resolved to SI on load.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use exosim::actuator::{ActuatorSpec, DEFAULT_BACKDRIVE_DURATION};
use exosim::control::{GaitConfig, PiGains, ProfileKind, TrackConfig, TrainConfig};
use exosim::lti::ChirpSpec;
use exosim::units::{Dimension, RawQuantity};
use exosim::{Error, Result};
use serde::{Deserialize, Serialize};

/// Seed used when neither the scenario nor the command line sets one.
pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Bandwidth,
    Backdrive,
    Benchmark,
    Track,
    TrainGait,
}

impl Experiment {
    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::Bandwidth => "bandwidth",
            Experiment::Backdrive => "backdrive",
            Experiment::Benchmark => "benchmark",
            Experiment::Track => "track",
            Experiment::TrainGait => "train-gait",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bandwidth" => Ok(Experiment::Bandwidth),
            "backdrive" => Ok(Experiment::Backdrive),
            "benchmark" => Ok(Experiment::Benchmark),
            "track" => Ok(Experiment::Track),
            "train-gait" => Ok(Experiment::TrainGait),
            other => Err(Error::Schema(format!("unknown experiment {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BandwidthParams {
    /// Commanded torque amplitudes, Nm.
    pub amplitudes: Vec<f64>,
    pub f_min: f64,
    pub f_max: f64,
    pub points: usize,
    /// Upper bound on the integration step, s.
    pub max_step: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrackParams {
    /// Hashed by content, not location.
    #[serde(skip)]
    pub estimator: PathBuf,
    pub profile: ProfileSource,
    pub config: TrackConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileSource {
    Builtin(ProfileKind),
    Table(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainParams {
    /// Where the model is written; does not affect the results.
    #[serde(skip)]
    pub model: PathBuf,
    pub gait: GaitConfig,
    pub training: TrainConfig,
}

/// A fully validated scenario with every quantity in SI units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scenario {
    pub name: String,
    pub experiment: Experiment,
    pub specs: Vec<ActuatorSpec>,
    pub seed: u64,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    pub bandwidth: Option<BandwidthParams>,
    pub backdrive: Option<ChirpSpec>,
    pub track: Option<TrackParams>,
    pub train: Option<TrainParams>,
}

impl Scenario {
    /// Replace the seed and every seed derived from it.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        if let Some(t) = &mut self.track {
            t.config.seed = seed;
        }
        if let Some(t) = &mut self.train {
            t.gait.seed = seed;
            t.training.seed = training_seed(seed);
        }
        self
    }
}

/// The trainer's shuffle and initialization seed. The offset makes the
/// default scenario seed reproduce the library's default training run.
fn training_seed(seed: u64) -> u64 {
    seed.wrapping_add(4)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    experiment: String,
    specs: Vec<String>,
    seed: Option<u64>,
    output: Option<String>,
    gains: Option<String>,
    bandwidth: Option<BandwidthFile>,
    backdrive: Option<BackdriveFile>,
    track: Option<TrackFile>,
    train: Option<TrainFile>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BandwidthFile {
    amplitudes: Vec<RawQuantity>,
    f_min: Option<RawQuantity>,
    f_max: Option<RawQuantity>,
    points: Option<usize>,
    max_step: Option<RawQuantity>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BackdriveFile {
    amplitude: Option<RawQuantity>,
    f_start: Option<RawQuantity>,
    f_end: Option<RawQuantity>,
    duration: Option<RawQuantity>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrackFile {
    estimator: String,
    profile: Option<String>,
    cadence: Option<RawQuantity>,
    duration: Option<RawQuantity>,
    peak_torque: Option<RawQuantity>,
    noise: Option<f64>,
    still_hip: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    model: String,
    cadences: Option<Vec<RawQuantity>>,
    held_out: Option<Vec<RawQuantity>>,
    strides_per_cadence: Option<usize>,
    noise: Option<f64>,
    hop: Option<usize>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
}

/// `[<spec name>]` tables of PI gains.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainsEntry {
    kp: RawQuantity,
    ki: RawQuantity,
    feedforward: RawQuantity,
    integrator_limit: RawQuantity,
}

fn schema(e: toml::de::Error, what: &str) -> Error {
    Error::Schema(format!("{what}: {}", e.message()))
}

fn opt(q: &Option<RawQuantity>, dim: Dimension, field: &str, default: f64) -> Result<f64> {
    q.as_ref().map_or(Ok(default), |q| q.resolve(dim, field))
}

fn resolve_path(base: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_relative() {
        base.join(path)
    } else {
        path.to_path_buf()
    }
}

fn missing(experiment: Experiment, table: &str) -> Error {
    Error::Schema(format!("experiment {experiment} needs a [{table}] table"))
}

pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".into());
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, &name, base)
}

/// Parse scenario text; relative paths resolve against `base`.
pub fn parse_scenario(text: &str, name: &str, base: &Path) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| schema(e, name))?;
    let experiment: Experiment = file.experiment.parse()?;
    if file.specs.is_empty() {
        return Err(Error::Schema("specs: at least one actuator spec is required".into()));
    }
    let mut specs = file
        .specs
        .iter()
        .map(|r| ActuatorSpec::resolve_ref(r, Some(base)))
        .collect::<Result<Vec<_>>>()?;
    let mut names: Vec<&str> = specs.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Schema("specs: names must be unique".into()));
    }
    if let Some(g) = &file.gains {
        apply_gains(&mut specs, &resolve_path(base, g))?;
    }

    let bandwidth = file.bandwidth.as_ref().map(resolve_bandwidth).transpose()?;
    let backdrive = match (&file.backdrive, experiment) {
        (Some(b), _) => Some(resolve_backdrive(b)?),
        (None, Experiment::Backdrive | Experiment::Benchmark) => Some(resolve_backdrive(&BackdriveFile {
            amplitude: None,
            f_start: None,
            f_end: None,
            duration: None,
        })?),
        (None, _) => None,
    };
    let track = file.track.as_ref().map(|t| resolve_track(t, base)).transpose()?;
    let train = file.train.as_ref().map(|t| resolve_train(t, base)).transpose()?;

    match experiment {
        Experiment::Bandwidth if bandwidth.is_none() => return Err(missing(experiment, "bandwidth")),
        Experiment::Benchmark => {
            if specs.len() < 2 {
                return Err(Error::Schema("benchmark needs at least two specs".into()));
            }
            match &bandwidth {
                None => return Err(missing(experiment, "bandwidth")),
                Some(b) if b.amplitudes.len() != 1 => {
                    return Err(Error::Schema("benchmark takes exactly one bandwidth amplitude".into()))
                }
                _ => {}
            }
        }
        Experiment::Track => {
            if track.is_none() {
                return Err(missing(experiment, "track"));
            }
            if specs.len() != 1 {
                return Err(Error::Schema("track takes exactly one spec".into()));
            }
        }
        Experiment::TrainGait if train.is_none() => return Err(missing(experiment, "train")),
        _ => {}
    }

    let scenario = Scenario {
        name: name.to_string(),
        experiment,
        specs,
        seed: DEFAULT_SEED,
        output: file.output.as_deref().map(|o| resolve_path(base, o)),
        bandwidth,
        backdrive,
        track,
        train,
    };
    Ok(scenario.with_seed(file.seed.unwrap_or(DEFAULT_SEED)))
}

fn apply_gains(specs: &mut [ActuatorSpec], path: &Path) -> Result<()> {
    if !path.exists() {
        return Err(Error::Config(format!("gains file {} does not exist", path.display())));
    }
    let text = std::fs::read_to_string(path)?;
    let table: BTreeMap<String, GainsEntry> = toml::from_str(&text).map_err(|e| schema(e, "gains"))?;
    for (name, g) in &table {
        let spec = specs
            .iter_mut()
            .find(|s| &s.name == name)
            .ok_or_else(|| Error::Schema(format!("gains: no spec named {name:?}")))?;
        let field = |f: &str| format!("gains.{name}.{f}");
        let gains = PiGains {
            kp: g.kp.resolve(Dimension::ProportionalGain, &field("kp"))?,
            ki: g.ki.resolve(Dimension::IntegralGain, &field("ki"))?,
            feedforward: g.feedforward.resolve(Dimension::ProportionalGain, &field("feedforward"))?,
            integrator_limit: g.integrator_limit.resolve(Dimension::Voltage, &field("integrator_limit"))?,
        };
        gains.validate()?;
        spec.gains = Some(gains);
    }
    Ok(())
}

fn resolve_bandwidth(b: &BandwidthFile) -> Result<BandwidthParams> {
    let amplitudes = b
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, q)| q.resolve(Dimension::Torque, &format!("bandwidth.amplitudes[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    if amplitudes.is_empty() || amplitudes.iter().any(|a| !(*a > 0.0)) {
        return Err(Error::Config("bandwidth.amplitudes must be positive and non-empty".into()));
    }
    let p = BandwidthParams {
        amplitudes,
        f_min: opt(&b.f_min, Dimension::Frequency, "bandwidth.f_min", 0.5)?,
        f_max: opt(&b.f_max, Dimension::Frequency, "bandwidth.f_max", 1000.0)?,
        points: b.points.unwrap_or(40),
        max_step: b
            .max_step
            .as_ref()
            .map(|q| q.resolve(Dimension::Time, "bandwidth.max_step"))
            .transpose()?,
    };
    if !(p.f_min > 0.0) || !(p.f_max > p.f_min) || p.points < 2 {
        return Err(Error::Config(format!(
            "bandwidth grid needs 0 < f_min < f_max and at least 2 points, got {} to {} Hz with {}",
            p.f_min, p.f_max, p.points
        )));
    }
    if p.max_step.is_some_and(|dt| !(dt > 0.0)) {
        return Err(Error::Config("bandwidth.max_step must be positive".into()));
    }
    Ok(p)
}

fn resolve_backdrive(b: &BackdriveFile) -> Result<ChirpSpec> {
    ChirpSpec::new(
        opt(&b.f_start, Dimension::Frequency, "backdrive.f_start", 0.0)?,
        opt(&b.f_end, Dimension::Frequency, "backdrive.f_end", 1.0)?,
        opt(&b.amplitude, Dimension::Angle, "backdrive.amplitude", 10f64.to_radians())?,
        opt(&b.duration, Dimension::Time, "backdrive.duration", DEFAULT_BACKDRIVE_DURATION)?,
    )
    .map_err(|e| Error::Config(format!("backdrive: {e}")))
}

fn resolve_track(t: &TrackFile, base: &Path) -> Result<TrackParams> {
    let d = TrackConfig::default();
    let profile = match t.profile.as_deref() {
        None => ProfileSource::Builtin(ProfileKind::Walking),
        Some(p) => match p.parse::<ProfileKind>() {
            Ok(k) if k != ProfileKind::Custom => ProfileSource::Builtin(k),
            _ => ProfileSource::Table(resolve_path(base, p)),
        },
    };
    Ok(TrackParams {
        estimator: resolve_path(base, &t.estimator),
        profile,
        config: TrackConfig {
            cadence: opt(&t.cadence, Dimension::Frequency, "track.cadence", d.cadence)?,
            duration: opt(&t.duration, Dimension::Time, "track.duration", d.duration)?,
            peak_torque: opt(&t.peak_torque, Dimension::Torque, "track.peak_torque", d.peak_torque)?,
            noise: t.noise.unwrap_or(d.noise),
            seed: d.seed,
            still_hip: t.still_hip.unwrap_or(false),
        },
    })
}

fn frequencies(qs: &Option<Vec<RawQuantity>>, field: &str, default: &[f64]) -> Result<Vec<f64>> {
    match qs {
        None => Ok(default.to_vec()),
        Some(v) => v
            .iter()
            .enumerate()
            .map(|(i, q)| q.resolve(Dimension::Frequency, &format!("{field}[{i}]")))
            .collect(),
    }
}

fn resolve_train(t: &TrainFile, base: &Path) -> Result<TrainParams> {
    let g = GaitConfig::default();
    let c = TrainConfig::default();
    Ok(TrainParams {
        model: resolve_path(base, &t.model),
        gait: GaitConfig {
            cadences: frequencies(&t.cadences, "train.cadences", &g.cadences)?,
            held_out: frequencies(&t.held_out, "train.held_out", &g.held_out)?,
            strides_per_speed: t.strides_per_cadence.unwrap_or(g.strides_per_speed),
            noise: t.noise.unwrap_or(g.noise),
            hop: t.hop.unwrap_or(g.hop),
            seed: g.seed,
        },
        training: TrainConfig {
            epochs: t.epochs.unwrap_or(c.epochs),
            learning_rate: t.learning_rate.unwrap_or(c.learning_rate),
            batch_size: t.batch_size.unwrap_or(c.batch_size),
            seed: c.seed,
        },
    })
}
