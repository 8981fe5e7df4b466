use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::Command as Process;

use exosim::actuator::{ActuatorSpec, Paradigm};
use exosim::control::mlp::mlp_init;
use exosim::control::{gains_for, ProfileKind};
use exosim::Error;
use exosim_bench::commands::{cmd_bandwidth, cmd_track, cmd_train_gait};
use exosim_bench::scenario::ProfileSource;
use exosim_bench::{exit_code, load_scenario, parse_scenario, run, Command, Report, RunOptions, Scenario};
use num_complex::Complex64;
use proptest::prelude::*;
use serde_json::Value;
use tempfile::TempDir;

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

fn parse_in(dir: &Path, text: &str) -> exosim::Result<Scenario> {
    parse_scenario(text, "test", dir)
}

/// Every number under `v` must sit in an object tagged with its source.
fn untagged_numbers(v: &Value, path: &str, out: &mut Vec<String>) {
    match v {
        Value::Number(_) => out.push(path.to_string()),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| untagged_numbers(x, &format!("{path}[{i}]"), out)),
        Value::Object(m) => {
            let tagged = match m.get("source").and_then(Value::as_str) {
                Some("computed") => m.get("config_hash").is_some_and(Value::is_string),
                Some("reference") => true,
                _ => false,
            };
            if tagged && m.get("value").is_some_and(Value::is_number) {
                return;
            }
            for (k, x) in m {
                untagged_numbers(x, &format!("{path}.{k}"), out);
            }
        }
        _ => {}
    }
}

fn assert_all_tagged(r: &Report) {
    let mut bad = Vec::new();
    untagged_numbers(&r.results, "results", &mut bad);
    assert!(bad.is_empty(), "untagged numeric cells: {bad:?}");
}

fn computed_hashes(v: &Value, out: &mut Vec<String>) {
    match v {
        Value::Array(a) => a.iter().for_each(|x| computed_hashes(x, out)),
        Value::Object(m) => {
            if let Some(h) = m.get("config_hash").and_then(Value::as_str) {
                out.push(h.to_string());
            }
            m.values().for_each(|x| computed_hashes(x, out));
        }
        _ => {}
    }
}

#[test]
fn shipped_benchmark_loads_the_three_presets() {
    let s = load_scenario(&shipped("paradigm-benchmark.toml")).unwrap();
    let labels: Vec<Paradigm> = s.specs.iter().map(|x| x.label).collect();
    assert_eq!(labels, vec![Paradigm::Conventional, Paradigm::Sea, Paradigm::Qdd]);
    for spec in &s.specs {
        assert_eq!(spec, &ActuatorSpec::preset(spec.label).unwrap());
    }
    assert_eq!(s.bandwidth.unwrap().amplitudes, vec![5.0]);
}

#[test]
fn every_shipped_scenario_loads() {
    for entry in std::fs::read_dir(shipped("")).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            load_scenario(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        }
    }
}

#[test]
fn hardware_amplitudes_are_accepted() {
    let s = load_scenario(&shipped("bandwidth-amplitudes.toml")).unwrap();
    assert_eq!(s.bandwidth.as_ref().unwrap().amplitudes, vec![10.0, 15.0, 20.0]);
}

/// `(ff + C) G1 / (1 + C G1)` with `C = kp + ki / jw` and G1 from the raw
/// parameters.
fn closed_loop_by_hand(s: &ActuatorSpec, f: f64) -> Complex64 {
    let g = gains_for(s).unwrap();
    let (m, t) = (&s.motor, &s.transmission);
    let n = t.gear_ratio;
    let jw = Complex64::new(0.0, 2.0 * PI * f);
    let je = n * n * m.inertia * m.resistance;
    let be = n * n * (m.resistance * m.friction + m.back_emf_constant * m.torque_constant) + m.resistance * t.damping;
    let g1 = n * m.torque_constant * (t.damping * jw + t.stiffness) / (je * jw * jw + be * jw + m.resistance * t.stiffness);
    let c = g.kp + g.ki / jw;
    (g.feedforward + c) * g1 / (1.0 + c * g1)
}

#[test]
fn small_signal_loop_matches_the_analytic_closed_loop() {
    let dir = TempDir::new().unwrap();
    let text = r#"
experiment = "bandwidth"
specs = ["conventional", "sea", "qdd"]
[bandwidth]
amplitudes = ["0.01 Nm"]
f_min = "1 Hz"
f_max = "300 Hz"
points = 6
max_step = "2 us"
"#;
    let s = parse_in(dir.path(), text).unwrap();
    for b in cmd_bandwidth(&s).unwrap() {
        let run = &b.runs[0];
        for (i, f) in run.measured.freqs().iter().enumerate() {
            let hand = closed_loop_by_hand(&b.spec, *f).norm();
            let m = run.measured.magnitude()[i];
            assert!((m - hand).abs() < 0.01 * hand, "{} at {f} Hz: {m} vs {hand}", b.spec.name);
            assert!((b.analytic.magnitude()[i] - hand).abs() < 1e-9 * hand);
        }
    }
}

#[test]
fn harness_bandwidth_is_within_one_grid_step_of_the_analytic_value() {
    let dir = TempDir::new().unwrap();
    let text = r#"
experiment = "bandwidth"
specs = ["sea", "qdd"]
[bandwidth]
amplitudes = ["0.01 Nm"]
f_min = "0.5 Hz"
f_max = "1 kHz"
points = 40
max_step = "5 us"
"#;
    let s = parse_in(dir.path(), text).unwrap();
    for b in cmd_bandwidth(&s).unwrap() {
        let analytic = b.analytic_bandwidth_hz.unwrap();
        let measured = b.runs[0].bandwidth_hz.unwrap();
        let freqs = b.analytic.freqs();
        let k = freqs.iter().position(|f| *f >= analytic).unwrap();
        let step = freqs[k] - freqs[k - 1];
        assert!((measured - analytic).abs() <= step, "{}: {measured} vs {analytic} (step {step})", b.spec.name);
    }
}

#[test]
fn saturation_lowers_the_large_signal_bandwidth() {
    let s = load_scenario(&shipped("bandwidth-amplitudes.toml")).unwrap();
    let b = &cmd_bandwidth(&s).unwrap()[0];
    let bw: Vec<f64> = b.runs.iter().map(|r| r.bandwidth_hz.unwrap()).collect();
    assert!(bw.windows(2).all(|w| w[1] <= w[0]), "{bw:?}");
    assert!(bw[0] < b.analytic_bandwidth_hz.unwrap());
}

#[test]
fn unstable_gains_are_an_instability_error() {
    let dir = TempDir::new().unwrap();
    // with kp = 0 a large integral gain destabilizes the series-elastic loop
    std::fs::write(
        dir.path().join("gains.toml"),
        "[sea]\nkp = \"0 V/Nm\"\nki = \"1e6 V/(Nm*s)\"\nfeedforward = \"0 V/Nm\"\nintegrator_limit = \"48 V\"\n",
    )
    .unwrap();
    let text = "experiment = \"bandwidth\"\nspecs = [\"sea\"]\ngains = \"gains.toml\"\n[bandwidth]\namplitudes = [\"5 Nm\"]\n";
    let s = parse_in(dir.path(), text).unwrap();
    let e = run(Command::Bandwidth, &s, &RunOptions::default()).unwrap_err();
    assert!(matches!(e, Error::Instability { .. }), "{e:?}");
    assert_eq!(exit_code(&e), 5);
}

#[test]
fn gains_for_an_unknown_spec_are_rejected() {
    let dir = TempDir::new().unwrap();
    std::fs::write(
        dir.path().join("gains.toml"),
        "[sae]\nkp = \"1 V/Nm\"\nki = \"1 V/(Nm*s)\"\nfeedforward = \"0 V/Nm\"\nintegrator_limit = \"48 V\"\n",
    )
    .unwrap();
    let text = "experiment = \"backdrive\"\nspecs = [\"sea\"]\ngains = \"gains.toml\"\n";
    assert!(matches!(parse_in(dir.path(), text), Err(Error::Schema(_))));
}

#[test]
fn backdrive_rows_carry_reference_values() {
    let dir = TempDir::new().unwrap();
    let text = "experiment = \"backdrive\"\nspecs = [\"conventional\", \"sea\", \"qdd\"]\n[backdrive]\nduration = \"20 s\"\n";
    let s = parse_in(dir.path(), text).unwrap();
    let r = run(Command::Backdrive, &s, &RunOptions::default()).unwrap();
    assert_all_tagged(&r);
    let rows = r.results["specs"].as_array().unwrap();
    let refs: Vec<f64> = rows.iter().map(|x| x["reference_peak"]["value"].as_f64().unwrap()).collect();
    assert_eq!(refs, vec![2.88, 6.10, 0.97]);
    for x in rows {
        assert_eq!(x["reference_peak"]["source"], "reference");
        assert_eq!(x["peak_torque"]["source"], "computed");
    }
    assert_eq!(r.csv.len(), 3);
}

#[test]
fn tiny_gear_ratio_spec_is_transparent() {
    let dir = TempDir::new().unwrap();
    let qdd = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/presets/qdd.toml")).unwrap();
    let custom: String = qdd
        .lines()
        .filter(|l| !l.starts_with("[control]") && !["kp", "ki", "feedforward", "integrator_limit"].iter().any(|k| l.starts_with(k)))
        .map(|l| match l {
            l if l.starts_with("label") => "label = \"custom\"".to_string(),
            l if l.starts_with("name") => "name = \"qdd-tiny-ratio\"".to_string(),
            l if l.starts_with("gear_ratio") => "gear_ratio = 1e-3".to_string(),
            l => l.to_string(),
        })
        .collect::<Vec<_>>()
        .join("\n");
    std::fs::write(dir.path().join("tiny.toml"), custom).unwrap();
    let text = "experiment = \"backdrive\"\nspecs = [\"tiny.toml\"]\n[backdrive]\nduration = \"20 s\"\n";
    let s = parse_in(dir.path(), text).unwrap();
    assert_eq!(s.specs[0].transmission.gear_ratio, 1e-3);
    let r = run(Command::Backdrive, &s, &RunOptions::default()).unwrap();
    let row = &r.results["specs"][0];
    assert!(row["peak_torque"]["value"].as_f64().unwrap() < 1e-3);
    assert!(row["reference_peak"].is_null());
}

#[test]
fn benchmark_report_is_fully_tagged_and_ranked() {
    let r = run(Command::Benchmark, &load_scenario(&shipped("paradigm-benchmark.toml")).unwrap(), &RunOptions::default()).unwrap();
    assert_all_tagged(&r);
    let mut hashes = Vec::new();
    computed_hashes(&r.results, &mut hashes);
    assert!(!hashes.is_empty());
    assert!(hashes.iter().all(|h| *h == r.meta.config_hash));

    let rows = r.results["rows"].as_array().unwrap();
    let get = |i: usize, k: &str| rows[i][k]["value"].as_f64().unwrap();
    let wn: Vec<f64> = (0..3).map(|i| get(i, "natural_frequency")).collect();
    for (got, want) in wn.iter().zip([16.7, 1.0, 47.0]) {
        assert!((got - want).abs() <= 0.005 * want, "{wn:?}");
    }
    let refs: Vec<f64> = (0..3).map(|i| get(i, "reference_bandwidth")).collect();
    assert_eq!(refs, vec![5.1, 4.2, 73.3]);
    assert_eq!(r.results["highest_bandwidth"], "qdd");
    assert_eq!(r.results["lowest_backdrive"], "qdd");
    assert!(r.to_text().contains("ref Hz"));
    assert!(r.meta.timestamp_unix.is_none());
}

fn write_untrained_estimator(dir: &Path) -> PathBuf {
    let p = dir.join("untrained.txt");
    mlp_init(0).save(&p).unwrap();
    p
}

#[test]
fn zero_profile_on_a_still_hip_tracks_perfectly() {
    let dir = TempDir::new().unwrap();
    write_untrained_estimator(dir.path());
    let table: String = (0..10).map(|i| format!("{},0\n", i * 10)).collect();
    std::fs::write(dir.path().join("zero.csv"), format!("phase_pct,torque_nm\n{table}")).unwrap();
    let text = r#"
experiment = "track"
specs = ["qdd"]
[track]
estimator = "untrained.txt"
profile = "zero.csv"
duration = "2 s"
still_hip = true
"#;
    let s = parse_in(dir.path(), text).unwrap();
    assert!(matches!(s.track.as_ref().unwrap().profile, ProfileSource::Table(_)));
    let r = cmd_track(&s).unwrap();
    assert_eq!(r.rms_error, 0.0);
    assert_eq!(r.rms_pct, 0.0);
}

#[test]
fn missing_estimator_is_a_configuration_error() {
    let dir = TempDir::new().unwrap();
    let text = "experiment = \"track\"\nspecs = [\"qdd\"]\n[track]\nestimator = \"absent.txt\"\n";
    let s = parse_in(dir.path(), text).unwrap();
    let e = run(Command::Track, &s, &RunOptions::default()).unwrap_err();
    assert!(matches!(e, Error::Config(_)), "{e:?}");
    assert_eq!(exit_code(&e), 7);
}

#[test]
fn track_percent_is_relative_to_the_profile_peak() {
    let dir = TempDir::new().unwrap();
    write_untrained_estimator(dir.path());
    let text = "experiment = \"track\"\nspecs = [\"qdd\"]\n[track]\nestimator = \"untrained.txt\"\nduration = \"3 s\"\npeak_torque = \"12 Nm\"\n";
    let s = parse_in(dir.path(), text).unwrap();
    let r = cmd_track(&s).unwrap();
    assert!((r.rms_pct - 100.0 * r.rms_error / 12.0).abs() < 1e-12);
    let peak = r.trace.tau_desired.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(peak <= 12.0 + 1e-9 && peak > 0.99 * 12.0, "{peak}");
}

fn small_training(dir: &Path, extra: &str) -> Scenario {
    let text = format!(
        "experiment = \"train-gait\"\nspecs = [\"qdd\"]\n[train]\nmodel = \"m/model.txt\"\nstrides_per_cadence = 10\nepochs = 2\n{extra}"
    );
    parse_in(dir, &text).unwrap()
}

#[test]
fn zero_learning_rate_keeps_the_untrained_baseline() {
    let dir = TempDir::new().unwrap();
    let s = small_training(dir.path(), "learning_rate = 0.0\n");
    let out = cmd_train_gait(&s).unwrap();
    assert_eq!(out.test_r2, out.baseline_test_r2);
    assert!(out.warnings.iter().any(|w| w.contains("learning rate is zero")));
    let r = run(Command::TrainGait, &s, &RunOptions::default()).unwrap();
    assert!(r.meta.warnings.iter().any(|w| w.contains("learning rate is zero")));
    assert_all_tagged(&r);
}

#[test]
fn same_seed_writes_identical_models() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    cmd_train_gait(&small_training(a.path(), "")).unwrap();
    cmd_train_gait(&small_training(b.path(), "")).unwrap();
    let read = |d: &TempDir| std::fs::read(d.path().join("m/model.txt")).unwrap();
    assert_eq!(read(&a), read(&b));
    cmd_train_gait(&small_training(b.path(), "").with_seed(8)).unwrap();
    assert_ne!(read(&a), read(&b));
}

#[test]
fn runaway_learning_rate_is_a_divergence_error() {
    let dir = TempDir::new().unwrap();
    let e = cmd_train_gait(&small_training(dir.path(), "learning_rate = 1e6\n")).unwrap_err();
    assert!(matches!(e, Error::TrainingDivergence { .. }), "{e:?}");
    assert_eq!(exit_code(&e), 6);
}

#[test]
fn tf_report_lists_every_spec() {
    let s = load_scenario(&shipped("backdrive.toml")).unwrap();
    let r = run(Command::Tf, &s, &RunOptions::default()).unwrap();
    let specs = r.results["specs"].as_array().unwrap();
    assert_eq!(specs.len(), 3);
    let qdd = &specs[2];
    assert_eq!(qdd["spec"], "qdd");
    assert!((qdd["natural_frequency_hz"].as_f64().unwrap() - 47.0).abs() < 0.1);
    assert_eq!(qdd["g1_den"].as_array().unwrap().len(), 3);
    assert_eq!(qdd["g2_num"].as_array().unwrap().len(), 4);
    assert!(r.text.contains("G1 num"));
}

#[test]
fn command_must_match_the_experiment() {
    let s = load_scenario(&shipped("backdrive.toml")).unwrap();
    let e = run(Command::Bandwidth, &s, &RunOptions::default()).unwrap_err();
    assert!(matches!(e, Error::Schema(_)));
}

#[test]
fn cli_exit_codes_and_outputs() {
    let bin = env!("CARGO_BIN_EXE_bench");
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "experiment = \"backdrive\"\nspecs = [\"qdd\"]\ngearRatioo = 8\n").unwrap();
    let out = Process::new(bin).args(["backdrive", "--scenario"]).arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("gearRatioo"));

    let unit = dir.path().join("unit.toml");
    std::fs::write(&unit, "experiment = \"bandwidth\"\nspecs = [\"qdd\"]\n[bandwidth]\namplitudes = [\"5\"]\n").unwrap();
    let out = Process::new(bin).args(["bandwidth", "--scenario"]).arg(&unit).output().unwrap();
    assert_eq!(out.status.code(), Some(4));

    let out_dir = dir.path().join("tf");
    let out = Process::new(bin)
        .args(["tf", "--timestamp", "--scenario"])
        .arg(shipped("backdrive.toml"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: Value = serde_json::from_str(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert!(json["metadata"]["timestamp_unix"].as_u64().is_some());
    assert!(out_dir.join("report.txt").exists());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn track_reports_are_deterministic_and_tagged(seed in 0u64..1000, duration in 1.0..2.0f64) {
        let dir = TempDir::new().unwrap();
        write_untrained_estimator(dir.path());
        let text = format!(
            "experiment = \"track\"\nspecs = [\"qdd\"]\nseed = {seed}\n[track]\nestimator = \"untrained.txt\"\nduration = \"{duration} s\"\nprofile = \"{}\"\n",
            ProfileKind::Squatting
        );
        let s = parse_in(dir.path(), &text).unwrap();
        let a = run(Command::Track, &s, &RunOptions::default()).unwrap();
        let b = run(Command::Track, &s, &RunOptions::default()).unwrap();
        prop_assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        prop_assert_eq!(&a.csv, &b.csv);
        let mut bad = Vec::new();
        untagged_numbers(&a.results, "results", &mut bad);
        prop_assert!(bad.is_empty(), "{:?}", bad);
    }
}
