use std::f64::consts::PI;

use exosim::actuator::{
    backdrive_peak, derived_params, g1_tf, g2_tf, limit_case_tf, output_impedance, ActuatorSpec, CouplingMode,
    HipMotion, HumanParams, LimitCase, Paradigm, Plant, DEFAULT_BACKDRIVE_DURATION,
};
use exosim::lti::sim::{integrate, pick_dt, signal, zero_signal, Signal, System, DEFAULT_DT};
use exosim::lti::{log_space, measure_frf, ChirpSpec, SteppedSine};
use num_complex::Complex64;
use proptest::prelude::*;

fn preset(p: Paradigm) -> ActuatorSpec {
    ActuatorSpec::preset(p).unwrap()
}

fn locked(spec: &ActuatorSpec, include_l: bool) -> Plant {
    Plant::new(spec.clone(), HumanParams::default(), CouplingMode::LockedOutput, include_l).unwrap()
}

fn prescribed(spec: &ActuatorSpec, angle: Signal, rate: Signal) -> Plant {
    Plant::new(
        spec.clone(),
        HumanParams::prescribed(HipMotion { angle, rate }),
        CouplingMode::PassiveBackdrive,
        false,
    )
    .unwrap()
}

/// G1(jw) from the raw parameters with complex arithmetic, independent of the
/// library's polynomial code.
fn g1_by_hand(s: &ActuatorSpec, w: f64) -> Complex64 {
    let m = &s.motor;
    let t = &s.transmission;
    let n = t.gear_ratio;
    let jw = Complex64::new(0.0, w);
    let je = n * n * m.inertia * m.resistance;
    let be = n * n * m.resistance * m.friction + n * n * m.back_emf_constant * m.torque_constant + m.resistance * t.damping;
    let ke = m.resistance * t.stiffness;
    n * m.torque_constant * (t.damping * jw + t.stiffness) / (je * jw * jw + be * jw + ke)
}

fn g2_by_hand(s: &ActuatorSpec, w: f64) -> Complex64 {
    let m = &s.motor;
    let t = &s.transmission;
    let n = t.gear_ratio;
    let jw = Complex64::new(0.0, w);
    let je = n * n * m.inertia * m.resistance;
    let be = n * n * m.resistance * m.friction + n * n * m.back_emf_constant * m.torque_constant + m.resistance * t.damping;
    let ke = m.resistance * t.stiffness;
    let motor = m.inertia * m.resistance * jw * jw + (m.resistance * m.friction + m.back_emf_constant * m.torque_constant) * jw;
    -(t.damping * jw + t.stiffness) * n * n * motor / (je * jw * jw + be * jw + ke)
}

#[test]
fn locked_output_simulation_matches_g1() {
    for p in Paradigm::PRESETS {
        let s = preset(p);
        let wn = derived_params(&s).natural_frequency;
        let freqs = log_space(0.1 / (2.0 * PI), 0.5 * wn / (2.0 * PI), 10);
        let frf = measure_frf(&locked(&s, false), &freqs, 1.0, &SteppedSine::default()).unwrap();
        for (f, m) in freqs.iter().zip(frf.magnitude()) {
            let g = g1_by_hand(&s, 2.0 * PI * f).norm();
            assert!((m - g).abs() < 0.01 * g, "{}: f={f} measured {m} analytic {g}", s.name);
        }
    }
}

#[test]
fn library_g1_and_g2_match_hand_evaluation() {
    for p in Paradigm::PRESETS {
        let s = preset(p);
        let (g1, g2) = (g1_tf(&s).unwrap(), g2_tf(&s).unwrap());
        for w in [0.3, 2.0 * PI, 40.0, 700.0] {
            let a = g1.freq_response_at(w).unwrap();
            assert!((a - g1_by_hand(&s, w)).norm() < 1e-10 * a.norm());
            let b = g2.freq_response_at(w).unwrap();
            assert!((b - g2_by_hand(&s, w)).norm() < 1e-10 * b.norm());
        }
    }
}

#[test]
fn qdd_g2_at_one_hertz() {
    let g = g2_by_hand(&preset(Paradigm::Qdd), 2.0 * PI).norm();
    assert!((g - 88.5).abs() < 0.1, "{g}");
    let lib = g2_tf(&preset(Paradigm::Qdd)).unwrap().freq_response_at(2.0 * PI).unwrap().norm();
    assert!((lib - g).abs() < 1e-10 * g);
}

#[test]
fn superposition_of_voltage_and_hip_inputs() {
    let s = preset(Paradigm::Qdd);
    let v = signal(|t| 2.0 * (2.0 * PI * 3.0 * t).sin());
    let (a, w) = (0.05, 2.0 * PI * 1.3);
    let angle = signal(move |t| a * (w * t).sin());
    let rate = signal(move |t| a * w * (w * t).cos());
    let run = |plant: Plant| -> Vec<f64> {
        let mut plant = plant;
        let dt = pick_dt(plant.fastest_rate(), DEFAULT_DT);
        integrate(&mut plant, dt, 2.0).unwrap().channel("tau_a").unwrap().to_vec()
    };
    let only_v = run(prescribed(&s, zero_signal(), zero_signal()).with_voltage(v.clone()));
    let only_h = run(prescribed(&s, angle.clone(), rate.clone()));
    let both = run(prescribed(&s, angle, rate).with_voltage(v));
    let scale = both.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    for k in 0..both.len() {
        assert!((both[k] - only_v[k] - only_h[k]).abs() < 0.01 * scale);
    }
}

#[test]
fn dc_torque_constant() {
    for p in Paradigm::PRESETS {
        let s = preset(p);
        let mut plant = locked(&s, false).with_voltage(signal(|_| 2.0));
        let settle = 15.0 * plant.slowest_time_constant().unwrap();
        let dt = pick_dt(plant.fastest_rate(), DEFAULT_DT);
        let tr = integrate(&mut plant, dt, settle).unwrap();
        let tau = *tr.channel("tau_a").unwrap().last().unwrap();
        let m = &s.motor;
        let expect = s.transmission.gear_ratio * m.torque_constant / m.resistance * 2.0;
        assert!((tau - expect).abs() < 0.005 * expect, "{}: {tau} vs {expect}", s.name);
    }
}

/// G1 with the winding inductance kept, from the raw parameters.
fn g1_with_inductance(s: &ActuatorSpec, w: f64) -> Complex64 {
    let m = &s.motor;
    let t = &s.transmission;
    let n = t.gear_ratio;
    let jw = Complex64::new(0.0, w);
    let mech = n * n * m.inertia * jw * jw + (n * n * m.friction + t.damping) * jw + t.stiffness;
    let winding = m.resistance + m.inductance * jw;
    n * m.torque_constant * (t.damping * jw + t.stiffness) / (winding * mech + n * n * m.back_emf_constant * m.torque_constant * jw)
}

fn inductance_change(p: Paradigm) -> Vec<(f64, f64)> {
    let s = preset(p);
    let corner = s.motor.resistance / s.motor.inductance;
    let freqs = log_space(0.5 / (2.0 * PI), 0.2 * corner / (2.0 * PI), 6);
    let without = measure_frf(&locked(&s, false), &freqs, 1.0, &SteppedSine::default()).unwrap();
    let with = measure_frf(&locked(&s, true), &freqs, 1.0, &SteppedSine::default()).unwrap();
    (0..freqs.len())
        .map(|i| (freqs[i], (with.magnitude()[i] - without.magnitude()[i]).abs() / without.magnitude()[i]))
        .collect()
}

#[test]
fn inductance_is_negligible_below_a_fifth_of_the_electrical_corner() {
    for p in [Paradigm::Conventional, Paradigm::Qdd] {
        for (f, change) in inductance_change(p) {
            assert!(change < 0.02, "{p:?}: f={f} change {change}");
        }
    }
}

#[test]
#[ignore = "false for sea: the exact model changes by 4.4% at 0.2 R/L and crosses 2% near 0.065 R/L"]
fn sea_inductance_is_negligible_below_a_fifth_of_the_electrical_corner() {
    for (f, change) in inductance_change(Paradigm::Sea) {
        assert!(change < 0.02, "f={f} change {change}");
    }
}

#[test]
fn inductive_plant_matches_its_exact_transfer() {
    for p in Paradigm::PRESETS {
        let s = preset(p);
        let corner = s.motor.resistance / s.motor.inductance;
        let freqs = log_space(0.5 / (2.0 * PI), corner / (2.0 * PI), 8);
        let frf = measure_frf(&locked(&s, true), &freqs, 1.0, &SteppedSine::default()).unwrap();
        for (f, m) in freqs.iter().zip(frf.magnitude()) {
            let g = g1_with_inductance(&s, 2.0 * PI * f).norm();
            assert!((m - g).abs() < 0.01 * g, "{p:?}: f={f} {m} vs {g}");
        }
    }
}

#[test]
fn clipped_drive_stays_below_linear_gain() {
    let s = preset(Paradigm::Qdd);
    let plant = locked(&s, false);
    let freqs = [2.0, 10.0, 40.0];
    let frf = measure_frf(&plant, &freqs, 200.0, &SteppedSine::default()).unwrap();
    for (f, m) in freqs.iter().zip(frf.magnitude()) {
        let g = g1_by_hand(&s, 2.0 * PI * f).norm();
        assert!(*m <= g, "f={f}: {m} > {g}");
        // 42 V of 200 V gets through, so the loss is substantial
        assert!(*m < 0.5 * g);
    }
}

#[test]
fn large_ratio_approaches_transmission_impedance() {
    let s = preset(Paradigm::Qdd).with_gear_ratio(1e4);
    let g2 = g2_tf(&s).unwrap();
    let oracle = limit_case_tf(&s, LimitCase::LargeRatio).unwrap();
    for w in log_space(0.1, 10.0, 25) {
        let a = g2.freq_response_at(w).unwrap().norm();
        let t = &s.transmission;
        let b = Complex64::new(t.stiffness, t.damping * w).norm();
        assert!((a - b).abs() < 0.01 * b, "w={w}: {a} vs {b}");
        assert!((oracle.freq_response_at(w).unwrap().norm() - b).abs() < 1e-12 * b);
    }
}

#[test]
fn small_ratio_vanishes() {
    let s = preset(Paradigm::Qdd).with_gear_ratio(1e-3);
    let g2 = g2_tf(&s).unwrap();
    let peak = log_space(0.1, 10.0, 50)
        .into_iter()
        .map(|w| g2.freq_response_at(w).unwrap().norm())
        .fold(0.0, f64::max);
    assert!(peak < 1e-3, "{peak}");
    assert!(output_impedance(&s, 0.0).unwrap().norm() < 1e-6);
    let zero = limit_case_tf(&s, LimitCase::SmallRatio).unwrap();
    assert_eq!(zero.freq_response_at(3.0).unwrap(), Complex64::new(0.0, 0.0));
}

#[test]
fn unity_ratio_coefficients_are_exact() {
    for p in Paradigm::PRESETS {
        let s = preset(p).with_gear_ratio(1.0);
        let g2 = g2_tf(&s).unwrap();
        let oracle = limit_case_tf(&s, LimitCase::UnityRatio).unwrap();
        assert_eq!(g2.num(), oracle.num(), "{}", s.name);
        assert_eq!(g2.den(), oracle.den(), "{}", s.name);
    }
}

#[test]
fn qdd_output_impedance_at_dc() {
    let z = output_impedance(&preset(Paradigm::Qdd), 0.0).unwrap();
    let hand = -64.0 * (0.08 + 0.2886f64.powi(2) / 0.58);
    assert!((z.re - hand).abs() < 1e-12 * hand.abs());
    assert!((z.re + 14.31).abs() < 0.005);
}

#[test]
fn every_preset_backdrive_is_dissipative_and_consistent() {
    let drive = ChirpSpec::new(0.0, 1.0, 10f64.to_radians(), DEFAULT_BACKDRIVE_DURATION).unwrap();
    for p in Paradigm::PRESETS {
        let r = backdrive_peak(&preset(p), &drive).unwrap();
        assert!(r.work <= 0.0, "{p:?}: {}", r.work);
        assert!(r.relative_gap() < 0.03, "{p:?}: {}", r.relative_gap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn backdrive_work_is_never_positive(
        n in 0.5..60.0f64,
        f1 in 0.2..3.0f64,
        amp_deg in 1.0..30.0f64,
    ) {
        let s = preset(Paradigm::Qdd).with_gear_ratio(n);
        let drive = ChirpSpec::new(0.0, f1, amp_deg.to_radians(), 4.0).unwrap();
        let r = backdrive_peak(&s, &drive).unwrap();
        prop_assert!(r.work <= 0.0, "work {}", r.work);
    }

    #[test]
    fn impedance_times_jw_is_g2(n in 0.1..100.0f64, w in 0.01..1000.0f64) {
        let s = preset(Paradigm::Sea).with_gear_ratio(n);
        let z = output_impedance(&s, w).unwrap() * Complex64::new(0.0, w);
        let g = g2_by_hand(&s, w);
        prop_assert!((z - g).norm() <= 1e-10 * g.norm());
    }
}
