//! The bench experiments. Each `cmd_*` returns structured results; [`run`]
//! renders them into a [`Report`].

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt::Write as _;
use std::path::Path;
use std::thread;

use exosim::actuator::{
    backdrive_peak, derived_params, g1_tf, g2_tf, ActuatorSpec, BackdriveResult, CouplingMode, HumanParams, Paradigm,
    Plant,
};
use exosim::control::mlp::phase_r2;
use exosim::control::{
    closed_loop_tf, gains_for, mlp_init, mlp_train, run_tracking, synthesize_gait, ClosedLoop, Normalization,
    PhaseEstimator, PiGains, ProfileKind, TorqueLoopProbe, TorqueProfile, TrackResult, TrackTrace,
};
use exosim::lti::sim::{pick_dt, zero_signal, System, DEFAULT_DT};
use exosim::lti::{bandwidth_3db, log_space, measure_frf, FrequencyResponse, SteppedSine, TransferFunction};
use exosim::{Error, Result};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::references;
use crate::report::{config_hash, csv, num, reference, sha256_hex, table, Cell, Metadata, Report, Stamp};
use crate::scenario::{BandwidthParams, Experiment, ProfileSource, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Bandwidth,
    Backdrive,
    Benchmark,
    Track,
    TrainGait,
    Tf,
}

impl Command {
    pub fn as_str(&self) -> &'static str {
        match self {
            Command::Bandwidth => "bandwidth",
            Command::Backdrive => "backdrive",
            Command::Benchmark => "benchmark",
            Command::Track => "track",
            Command::TrainGait => "train-gait",
            Command::Tf => "tf",
        }
    }

    fn experiment(&self) -> Option<Experiment> {
        match self {
            Command::Bandwidth => Some(Experiment::Bandwidth),
            Command::Backdrive => Some(Experiment::Backdrive),
            Command::Benchmark => Some(Experiment::Benchmark),
            Command::Track => Some(Experiment::Track),
            Command::TrainGait => Some(Experiment::TrainGait),
            Command::Tf => None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub timestamp: bool,
}

/// Run `command` on `scenario` and render its report.
pub fn run(command: Command, scenario: &Scenario, opts: &RunOptions) -> Result<Report> {
    if let Some(exp) = command.experiment() {
        if exp != scenario.experiment {
            return Err(Error::Schema(format!(
                "scenario {} is a {} experiment, not {}",
                scenario.name,
                scenario.experiment,
                command.as_str()
            )));
        }
    }
    let mut report = match command {
        Command::Bandwidth => render_bandwidth(scenario)?,
        Command::Backdrive => render_backdrive(scenario)?,
        Command::Benchmark => render_benchmark(scenario)?,
        Command::Track => render_track(scenario)?,
        Command::TrainGait => render_train(scenario)?,
        Command::Tf => render_tf(scenario)?,
    };
    report.meta.command = command.as_str().into();
    if opts.timestamp {
        report.meta.timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .ok()
            .map(|d| d.as_secs());
    }
    Ok(report)
}

fn meta(scenario: &Scenario, hash: &str, warnings: Vec<String>) -> Metadata {
    Metadata {
        command: String::new(),
        scenario: scenario.name.clone(),
        config_hash: hash.to_string(),
        seed: scenario.seed,
        timestamp_unix: None,
        warnings,
    }
}

fn spec_warnings(specs: &[ActuatorSpec]) -> Vec<String> {
    specs.iter().flat_map(|s| s.warnings()).collect()
}

/// Run one closure per spec on its own thread; results keep the spec order.
fn per_spec<T: Send>(specs: &[ActuatorSpec], f: impl Fn(&ActuatorSpec) -> Result<T> + Sync) -> Result<Vec<T>> {
    thread::scope(|s| {
        let handles: Vec<_> = specs.iter().map(|spec| s.spawn(|| f(spec))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|p| std::panic::resume_unwind(p)))
            .collect()
    })
}

fn locked_plant(spec: &ActuatorSpec) -> Result<Plant> {
    Plant::new(spec.clone(), HumanParams::default(), CouplingMode::LockedOutput, false)
}

/// Fails with the offending pole when the unsaturated loop is unstable.
pub fn check_loop_stable(spec: &ActuatorSpec, gains: &PiGains) -> Result<TransferFunction> {
    let tf = closed_loop_tf(spec, gains)?;
    let poles = tf.poles()?;
    if let Some(p) = poles.iter().filter(|p| p.re >= 0.0).max_by(|a, b| a.re.total_cmp(&b.re)) {
        return Err(Error::Instability { frequency: p.im.abs() / (2.0 * PI), pole_re: p.re, pole_im: p.im });
    }
    Ok(tf)
}

/// Exact -3 dB frequency of a stable transfer function: a log scan from
/// 1 mHz to 100 kHz followed by bisection on the first crossing.
pub fn analytic_bandwidth(tf: &TransferFunction) -> Result<Option<f64>> {
    let dc = tf.dc_gain()?.abs();
    let level = dc * FRAC_1_SQRT_2;
    let mag = |f: f64| tf.eval(Complex64::new(0.0, 2.0 * PI * f)).norm();
    let grid = log_space(1e-3, 1e5, 4000);
    let Some(i) = grid.iter().position(|f| mag(*f) < level) else {
        return Ok(None);
    };
    if i == 0 {
        return Ok(Some(grid[0]));
    }
    let (mut lo, mut hi) = (grid[i - 1], grid[i]);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mag(mid) < level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[derive(Debug, Clone)]
pub struct AmplitudeRun {
    /// Nm
    pub amplitude: f64,
    pub measured: FrequencyResponse,
    /// Grid-interpolated -3 dB frequency of the stepped-sine response, Hz.
    pub bandwidth_hz: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SpecBandwidth {
    pub spec: ActuatorSpec,
    pub gains: PiGains,
    pub analytic: FrequencyResponse,
    /// Exact -3 dB frequency of the continuous loop, Hz.
    pub analytic_bandwidth_hz: Option<f64>,
    /// Integration step of the closed loop at the grid's slowest point, s.
    pub loop_dt: f64,
    pub runs: Vec<AmplitudeRun>,
}

fn bandwidth_for(spec: &ActuatorSpec, p: &BandwidthParams) -> Result<SpecBandwidth> {
    let gains = gains_for(spec)?;
    let tf = check_loop_stable(spec, &gains)?;
    let freqs = log_space(p.f_min, p.f_max, p.points);
    let probe = TorqueLoopProbe { plant: locked_plant(spec)?, gains };
    let opts = SteppedSine { max_dt: p.max_step, ..SteppedSine::default() };
    let dc = tf.dc_gain()?;
    let runs = p
        .amplitudes
        .iter()
        .map(|&amplitude| {
            let measured = measure_frf(&probe, &freqs, amplitude, &opts)?;
            let bandwidth_hz = bandwidth_3db(&measured, dc)?;
            Ok(AmplitudeRun { amplitude, measured, bandwidth_hz })
        })
        .collect::<Result<Vec<_>>>()?;
    let cl = ClosedLoop::new(probe.plant.clone(), gains, zero_signal())?;
    let loop_dt = pick_dt(cl.fastest_rate(), p.max_step.map_or(DEFAULT_DT, |m| m.min(DEFAULT_DT)));
    Ok(SpecBandwidth {
        spec: spec.clone(),
        gains,
        analytic: FrequencyResponse::analytic(&tf, &freqs)?,
        analytic_bandwidth_hz: analytic_bandwidth(&tf)?,
        loop_dt,
        runs,
    })
}

pub fn cmd_bandwidth(scenario: &Scenario) -> Result<Vec<SpecBandwidth>> {
    let p = scenario
        .bandwidth
        .as_ref()
        .ok_or_else(|| Error::Schema("scenario has no [bandwidth] table".into()))?;
    per_spec(&scenario.specs, |s| bandwidth_for(s, p))
}

fn bode_csv(b: &SpecBandwidth, run: &AmplitudeRun) -> String {
    let rows = (0..run.measured.len()).map(|i| {
        vec![
            run.measured.freqs()[i],
            run.measured.magnitude()[i],
            run.measured.phase()[i],
            b.analytic.magnitude()[i],
            b.analytic.phase()[i],
        ]
    });
    csv(&["freq_hz", "magnitude", "phase_rad", "analytic_magnitude", "analytic_phase_rad"], rows)
}

/// Grid spacing around the measured crossing, Hz.
fn grid_step_at(freqs: &[f64], f: Option<f64>) -> Option<f64> {
    let f = f?;
    freqs.windows(2).find(|w| f <= w[1]).map(|w| w[1] - w[0])
}

fn render_bandwidth(scenario: &Scenario) -> Result<Report> {
    let hash = config_hash(scenario, &[])?;
    let st = Stamp { hash: hash.clone() };
    let results = cmd_bandwidth(scenario)?;
    let mut rows = Vec::new();
    let mut csvs = Vec::new();
    let mut json_specs = Vec::new();
    for b in &results {
        let mut runs = Vec::new();
        for r in &b.runs {
            let file = format!("bode-{}-{}Nm.csv", b.spec.name, r.amplitude);
            csvs.push((file.clone(), bode_csv(b, r)));
            rows.push(vec![
                b.spec.name.clone(),
                num(Some(r.amplitude)),
                num(r.bandwidth_hz),
                num(b.analytic_bandwidth_hz),
                num(grid_step_at(b.analytic.freqs(), r.bandwidth_hz)),
            ]);
            runs.push(json!({
                "amplitude": st.cell(r.amplitude, "Nm"),
                "bandwidth_stepped_sine": st.opt(r.bandwidth_hz, "Hz"),
                "grid_step_at_crossing": st.opt(grid_step_at(b.analytic.freqs(), r.bandwidth_hz), "Hz"),
                "bode_csv": file,
            }));
        }
        json_specs.push(json!({
            "spec": b.spec.name,
            "label": b.spec.label,
            "gains": b.gains,
            "bandwidth_analytic": st.opt(b.analytic_bandwidth_hz, "Hz"),
            "reference_bandwidth": references::bandwidth_hz(b.spec.label).map(|v| reference(v, "Hz")),
            "loop_dt": st.cell(b.loop_dt, "s"),
            "runs": runs,
        }));
    }
    let text = table(&["spec", "amplitude Nm", "stepped-sine Hz", "analytic Hz", "grid step Hz"], &rows);
    Ok(Report {
        meta: meta(scenario, &hash, spec_warnings(&scenario.specs)),
        results: json!({ "specs": json_specs }),
        text,
        csv: csvs,
    })
}

pub fn cmd_backdrive(scenario: &Scenario) -> Result<Vec<(ActuatorSpec, BackdriveResult)>> {
    let drive = scenario
        .backdrive
        .ok_or_else(|| Error::Schema("scenario has no backdrive drive".into()))?;
    per_spec(&scenario.specs, |s| Ok((s.clone(), backdrive_peak(s, &drive)?)))
}

fn backdrive_json(st: &Stamp, spec: &ActuatorSpec, r: &BackdriveResult) -> Value {
    json!({
        "spec": spec.name,
        "label": spec.label,
        "peak_torque": st.cell(r.peak_torque, "Nm"),
        "predicted_peak": st.cell(r.predicted_peak, "Nm"),
        "relative_gap": st.cell(r.relative_gap(), "1"),
        "work": st.cell(r.work, "J"),
        "dt": st.cell(r.dt, "s"),
        "stepper": r.stepper,
        "reference_peak": references::backdrive_nm(spec.label).map(|v| reference(v, "Nm")),
    })
}

fn trace_csv(trace: &exosim::lti::Trace) -> Result<String> {
    let mut buf = Vec::new();
    trace.write_csv(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

fn render_backdrive(scenario: &Scenario) -> Result<Report> {
    let hash = config_hash(scenario, &[])?;
    let st = Stamp { hash: hash.clone() };
    let results = cmd_backdrive(scenario)?;
    let mut rows = Vec::new();
    let mut csvs = Vec::new();
    let mut specs = Vec::new();
    for (spec, r) in &results {
        csvs.push((format!("backdrive-{}.csv", spec.name), trace_csv(&r.trace)?));
        rows.push(vec![
            spec.name.clone(),
            num(Some(r.peak_torque)),
            num(Some(r.predicted_peak)),
            format!("{:.2}%", 100.0 * r.relative_gap()),
            num(references::backdrive_nm(spec.label)),
        ]);
        specs.push(backdrive_json(&st, spec, r));
    }
    let text = table(&["spec", "peak Nm", "predicted Nm", "gap", "reference Nm"], &rows);
    Ok(Report {
        meta: meta(scenario, &hash, spec_warnings(&scenario.specs)),
        results: json!({ "specs": specs }),
        text,
        csv: csvs,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkRow {
    pub label: Paradigm,
    pub spec: String,
    pub bandwidth: Option<Cell>,
    pub bandwidth_analytic: Option<Cell>,
    pub backdrive_peak: Cell,
    pub backdrive_predicted: Cell,
    pub natural_frequency: Cell,
    pub dc_torque_gain: Cell,
    pub loop_dt: Cell,
    pub backdrive_dt: Cell,
    pub reference_bandwidth: Option<Cell>,
    pub reference_backdrive: Option<Cell>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchmarkRow>,
    /// QDD over SEA closed-loop bandwidth, when both are present.
    pub qdd_sea_bandwidth_ratio: Option<Cell>,
    /// Which spec has the lowest peak backdrive torque.
    pub lowest_backdrive: String,
    /// Which spec has the highest closed-loop bandwidth.
    pub highest_bandwidth: Option<String>,
}

fn deviation(what: &str, computed: Option<f64>, reference: Option<f64>, unit: &str) -> Option<String> {
    let (c, r) = (computed?, reference?);
    Some(format!("{what}: computed {} {unit} vs reference {} {unit} ({:.2}x)", num(Some(c)), r, c / r))
}

pub fn cmd_benchmark(scenario: &Scenario, st: &Stamp) -> Result<BenchmarkReport> {
    let p = scenario
        .bandwidth
        .as_ref()
        .ok_or_else(|| Error::Schema("scenario has no [bandwidth] table".into()))?;
    let drive = scenario
        .backdrive
        .ok_or_else(|| Error::Schema("scenario has no backdrive drive".into()))?;
    let rows = per_spec(&scenario.specs, |spec| {
        let b = bandwidth_for(spec, p)?;
        let d = backdrive_peak(spec, &drive)?;
        let bw = b.runs[0].bandwidth_hz;
        let ref_bw = references::bandwidth_hz(spec.label);
        let ref_bd = references::backdrive_nm(spec.label);
        let notes = [
            deviation("bandwidth", bw, ref_bw, "Hz"),
            deviation("backdrive", Some(d.peak_torque), ref_bd, "Nm"),
        ]
        .into_iter()
        .flatten()
        .collect();
        Ok(BenchmarkRow {
            label: spec.label,
            spec: spec.name.clone(),
            bandwidth: st.opt(bw, "Hz"),
            bandwidth_analytic: st.opt(b.analytic_bandwidth_hz, "Hz"),
            backdrive_peak: st.cell(d.peak_torque, "Nm"),
            backdrive_predicted: st.cell(d.predicted_peak, "Nm"),
            natural_frequency: st.cell(derived_params(spec).natural_frequency_hz, "Hz"),
            dc_torque_gain: st.cell(g1_tf(spec)?.dc_gain()?, "Nm/V"),
            loop_dt: st.cell(b.loop_dt, "s"),
            backdrive_dt: st.cell(d.dt, "s"),
            reference_bandwidth: ref_bw.map(|v| reference(v, "Hz")),
            reference_backdrive: ref_bd.map(|v| reference(v, "Nm")),
            notes,
        })
    })?;
    let find = |l: Paradigm| rows.iter().find(|r| r.label == l).and_then(|r| r.bandwidth.as_ref()).map(Cell::value);
    let ratio = match (find(Paradigm::Qdd), find(Paradigm::Sea)) {
        (Some(q), Some(s)) => Some(st.cell(q / s, "1")),
        _ => None,
    };
    let lowest_backdrive = rows
        .iter()
        .min_by(|a, b| a.backdrive_peak.value().total_cmp(&b.backdrive_peak.value()))
        .map(|r| r.spec.clone())
        .expect("benchmark has at least two specs");
    let highest_bandwidth = rows
        .iter()
        .filter_map(|r| r.bandwidth.as_ref().map(|c| (r, c.value())))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(r, _)| r.spec.clone());
    Ok(BenchmarkReport { rows, qdd_sea_bandwidth_ratio: ratio, lowest_backdrive, highest_bandwidth })
}

fn render_benchmark(scenario: &Scenario) -> Result<Report> {
    let hash = config_hash(scenario, &[])?;
    let st = Stamp { hash: hash.clone() };
    let bench = cmd_benchmark(scenario, &st)?;
    let val = |c: &Option<Cell>| num(c.as_ref().map(Cell::value));
    let rows: Vec<Vec<String>> = bench
        .rows
        .iter()
        .map(|r| {
            vec![
                r.spec.clone(),
                val(&r.bandwidth),
                val(&r.bandwidth_analytic),
                val(&r.reference_bandwidth),
                num(Some(r.backdrive_peak.value())),
                val(&r.reference_backdrive),
                num(Some(r.natural_frequency.value())),
                num(Some(r.dc_torque_gain.value())),
            ]
        })
        .collect();
    let mut text = table(
        &[
            "spec",
            "bandwidth Hz",
            "analytic Hz",
            "ref Hz",
            "backdrive Nm",
            "ref Nm",
            "open-loop wn Hz",
            "DC gain Nm/V",
        ],
        &rows,
    );
    text.push('\n');
    if let Some(r) = &bench.qdd_sea_bandwidth_ratio {
        let _ = writeln!(text, "qdd / sea bandwidth: {}", num(Some(r.value())));
    }
    let _ = writeln!(text, "highest bandwidth: {}", bench.highest_bandwidth.as_deref().unwrap_or("-"));
    let _ = writeln!(text, "lowest backdrive: {}", bench.lowest_backdrive);
    text.push_str("ref columns are published values shown for comparison, not computed.\n");
    for r in &bench.rows {
        for n in &r.notes {
            let _ = writeln!(text, "{}: {n}", r.spec);
        }
    }
    let results = serde_json::to_value(&bench).map_err(|e| Error::Config(e.to_string()))?;
    Ok(Report { meta: meta(scenario, &hash, spec_warnings(&scenario.specs)), results, text, csv: Vec::new() })
}

fn load_profile(src: &ProfileSource) -> Result<TorqueProfile> {
    match src {
        ProfileSource::Builtin(k) => TorqueProfile::builtin(*k),
        ProfileSource::Table(path) => {
            if !path.exists() {
                return Err(Error::Config(format!("profile table {} does not exist", path.display())));
            }
            TorqueProfile::load(ProfileKind::Custom, path)
        }
    }
}

fn read_bytes(path: &Path, what: &str) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::Config(format!("{what} {}: {e}", path.display())))
}

pub fn cmd_track(scenario: &Scenario) -> Result<TrackResult> {
    let t = scenario.track.as_ref().ok_or_else(|| Error::Schema("scenario has no [track] table".into()))?;
    let estimator = PhaseEstimator::load(&t.estimator)?;
    let profile = load_profile(&t.profile)?;
    let spec = &scenario.specs[0];
    run_tracking(spec, &gains_for(spec)?, &estimator, &profile, &t.config)
}

fn tracking_csv(trace: &TrackTrace) -> String {
    csv(&TrackTrace::COLUMNS, trace.rows().map(|r| r.to_vec()))
}

fn render_track(scenario: &Scenario) -> Result<Report> {
    let t = scenario.track.as_ref().ok_or_else(|| Error::Schema("scenario has no [track] table".into()))?;
    let model = read_bytes(&t.estimator, "estimator")?;
    let table_bytes = match &t.profile {
        ProfileSource::Table(p) => read_bytes(p, "profile table")?,
        ProfileSource::Builtin(_) => Vec::new(),
    };
    let hash = config_hash(scenario, &[&model, &table_bytes])?;
    let st = Stamp { hash: hash.clone() };
    let r = cmd_track(scenario)?;
    let refs: Vec<Value> = references::TRACKING_RMS_NM
        .iter()
        .map(|(cond, v)| json!({ "condition": cond, "rms_error": reference(*v, "Nm") }))
        .collect();
    let results = json!({
        "spec": scenario.specs[0].name,
        "estimator_sha256": sha256_hex(&model),
        "rms_error": st.cell(r.rms_error, "Nm"),
        "rms_percent": st.cell(r.rms_pct, "%"),
        "rms_error_vs_desired": st.cell(r.rms_error_vs_desired, "Nm"),
        "phase_rms_error": st.cell(r.phase_rms_error, "%"),
        "max_phase_jump": st.cell(r.max_phase_jump, "%"),
        "dt": st.cell(r.dt, "s"),
        "reference_rms_error": reference(references::TRACKING_SUMMARY_NM, "Nm"),
        "reference_rms_percent": reference(references::TRACKING_SUMMARY_PCT, "%"),
        "reference_conditions": refs,
        "trace_csv": "tracking.csv",
    });
    let rows = vec![
        vec!["rms error Nm".into(), num(Some(r.rms_error)), num(Some(references::TRACKING_SUMMARY_NM))],
        vec!["rms % of peak".into(), num(Some(r.rms_pct)), num(Some(references::TRACKING_SUMMARY_PCT))],
        vec!["rms vs true-phase profile Nm".into(), num(Some(r.rms_error_vs_desired)), "-".into()],
        vec!["phase rms error %".into(), num(Some(r.phase_rms_error)), "-".into()],
    ];
    let mut text = table(&["quantity", "computed", "reference"], &rows);
    text.push_str("reference values are hardware measurements shown for comparison.\n");
    Ok(Report {
        meta: meta(scenario, &hash, spec_warnings(&scenario.specs)),
        results,
        text,
        csv: vec![("tracking.csv".into(), tracking_csv(&r.trace))],
    })
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub train_r2: f64,
    pub test_r2: f64,
    /// Test R^2 of the initial weights under the fitted normalization.
    pub baseline_test_r2: f64,
    pub initial_loss: f64,
    pub loss_history: Vec<f64>,
    /// Contents of the written model file.
    pub model_text: String,
    pub warnings: Vec<String>,
}

/// Synthesize, train, and write the model file named by the scenario.
pub fn cmd_train_gait(scenario: &Scenario) -> Result<TrainSummary> {
    let t = scenario.train.as_ref().ok_or_else(|| Error::Schema("scenario has no [train] table".into()))?;
    let mut warnings = Vec::new();
    if t.training.learning_rate == 0.0 {
        warnings.push("learning rate is zero: the estimator keeps its initial weights".to_string());
    }
    let data = synthesize_gait(&t.gait)?;
    let out = mlp_train(&data, &t.training)?;
    let mut baseline = mlp_init(t.training.seed);
    baseline.norm = Normalization::fit(&data.train)?;
    let baseline_test_r2 = phase_r2(&baseline, &data.test)?;
    if let Some(dir) = t.model.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    out.estimator.save(&t.model)?;
    Ok(TrainSummary {
        train_r2: out.train_r2,
        test_r2: out.test_r2,
        baseline_test_r2,
        initial_loss: out.initial_loss,
        loss_history: out.loss_history,
        model_text: out.estimator.to_text(),
        warnings,
    })
}

fn render_train(scenario: &Scenario) -> Result<Report> {
    let hash = config_hash(scenario, &[])?;
    let st = Stamp { hash: hash.clone() };
    let s = cmd_train_gait(scenario)?;
    let t = scenario.train.as_ref().expect("checked by cmd_train_gait");
    let final_loss = *s.loss_history.last().expect("at least one epoch");
    let results = json!({
        "model_file": t.model.file_name().map(|n| n.to_string_lossy().into_owned()),
        "model_sha256": sha256_hex(s.model_text.as_bytes()),
        "train_r2": st.cell(s.train_r2, "1"),
        "test_r2": st.cell(s.test_r2, "1"),
        "baseline_test_r2": st.cell(s.baseline_test_r2, "1"),
        "initial_loss": st.cell(s.initial_loss, "1"),
        "final_loss": st.cell(final_loss, "1"),
        "reference_test_r2": reference(references::PHASE_TEST_R2, "1"),
        "train_cadences": t.gait.cadences.iter().filter(|c| !t.gait.held_out.contains(c)).map(|c| st.cell(*c, "Hz")).collect::<Vec<_>>(),
        "test_cadences": t.gait.held_out.iter().map(|c| st.cell(*c, "Hz")).collect::<Vec<_>>(),
        "loss_csv": "loss.csv",
    });
    let rows = vec![
        vec!["train R2".into(), format!("{:.5}", s.train_r2), "-".into()],
        vec!["test R2".into(), format!("{:.5}", s.test_r2), format!("{}", references::PHASE_TEST_R2)],
        vec!["untrained test R2".into(), format!("{:.5}", s.baseline_test_r2), "-".into()],
        vec!["final loss".into(), num(Some(final_loss)), "-".into()],
    ];
    let mut text = table(&["quantity", "computed", "reference"], &rows);
    let _ = writeln!(text, "model written to {}", t.model.display());
    text.push_str("the reference R2 was measured on human recordings; synthetic data is easier.\n");
    let loss_rows = std::iter::once(vec![0.0, s.initial_loss])
        .chain(s.loss_history.iter().enumerate().map(|(i, l)| vec![(i + 1) as f64, *l]));
    let mut warnings = spec_warnings(&scenario.specs);
    warnings.extend(s.warnings.iter().cloned());
    Ok(Report {
        meta: meta(scenario, &hash, warnings),
        results,
        text,
        csv: vec![("loss.csv".into(), csv(&["epoch", "loss"], loss_rows))],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TfSummary {
    pub spec: String,
    pub g1_num: Vec<f64>,
    pub g1_den: Vec<f64>,
    pub g2_num: Vec<f64>,
    pub g2_den: Vec<f64>,
    /// `[re, im]` pairs, rad/s.
    pub poles: Vec<[f64; 2]>,
    pub natural_frequency_hz: f64,
    pub dc_torque_gain: f64,
    pub gains: PiGains,
    pub closed_loop_poles: Vec<[f64; 2]>,
}

fn pairs(z: &[Complex64]) -> Vec<[f64; 2]> {
    let mut v: Vec<[f64; 2]> = z.iter().map(|z| [z.re, z.im]).collect();
    v.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    v
}

pub fn cmd_tf(scenario: &Scenario) -> Result<Vec<TfSummary>> {
    scenario
        .specs
        .iter()
        .map(|spec| {
            let g1 = g1_tf(spec)?;
            let g2 = g2_tf(spec)?;
            let gains = gains_for(spec)?;
            Ok(TfSummary {
                spec: spec.name.clone(),
                g1_num: g1.num().to_vec(),
                g1_den: g1.den().to_vec(),
                g2_num: g2.num().to_vec(),
                g2_den: g2.den().to_vec(),
                poles: pairs(&g1.poles()?),
                natural_frequency_hz: derived_params(spec).natural_frequency_hz,
                dc_torque_gain: g1.dc_gain()?,
                gains,
                closed_loop_poles: pairs(&closed_loop_tf(spec, &gains)?.poles()?),
            })
        })
        .collect()
}

fn poly_text(c: &[f64]) -> String {
    c.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(", ")
}

fn render_tf(scenario: &Scenario) -> Result<Report> {
    let hash = config_hash(&scenario.specs, &[])?;
    let tfs = cmd_tf(scenario)?;
    let mut text = String::new();
    for t in &tfs {
        let _ = writeln!(text, "{}", t.spec);
        let _ = writeln!(text, "  G1 num [{}]", poly_text(&t.g1_num));
        let _ = writeln!(text, "  G1 den [{}]", poly_text(&t.g1_den));
        let _ = writeln!(text, "  G2 num [{}]", poly_text(&t.g2_num));
        let _ = writeln!(text, "  G2 den [{}]", poly_text(&t.g2_den));
        let poles: Vec<String> = t.poles.iter().map(|p| format!("{:.4} {:+.4}j", p[0], p[1])).collect();
        let _ = writeln!(text, "  poles {}", poles.join(", "));
        let _ = writeln!(text, "  open-loop wn {} Hz, DC gain {} Nm/V", num(Some(t.natural_frequency_hz)), num(Some(t.dc_torque_gain)));
        let _ = writeln!(text, "  PI kp {} V/Nm, ki {} V/(Nm*s)", num(Some(t.gains.kp)), num(Some(t.gains.ki)));
    }
    let results = serde_json::to_value(&tfs).map_err(|e| Error::Config(e.to_string()))?;
    Ok(Report {
        meta: meta(scenario, &hash, spec_warnings(&scenario.specs)),
        results: json!({ "specs": results }),
        text,
        csv: Vec::new(),
    })
}
