use std::sync::OnceLock;

use exosim::control::gait::{imu_stream, synthesize_gait, GaitConfig, GaitDataset, WINDOW};
use exosim::control::mlp::{
    backprop, batch_loss, mlp_init, mlp_train, phase_error_pct, phase_target, standardize, Normalization, TrainConfig,
    TrainOutcome, OUTPUTS,
};
use exosim::control::profile::{profile_torque, ProfileKind, TorqueProfile};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dataset() -> &'static GaitDataset {
    static DS: OnceLock<GaitDataset> = OnceLock::new();
    DS.get_or_init(|| synthesize_gait(&GaitConfig::default()).unwrap())
}

fn trained() -> &'static TrainOutcome {
    static OUT: OnceLock<TrainOutcome> = OnceLock::new();
    OUT.get_or_init(|| mlp_train(dataset(), &TrainConfig::default()).unwrap())
}

#[test]
fn backprop_matches_central_differences() {
    let ds = dataset();
    let norm = Normalization::fit(&ds.train).unwrap();
    let xs: Vec<Vec<f64>> = ds.train.iter().step_by(97).take(8).map(|s| standardize(&s.features, &norm).unwrap().0).collect();
    let refs: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
    let ts: Vec<[f64; OUTPUTS]> = ds.train.iter().step_by(97).take(8).map(|s| phase_target(s.phase)).collect();

    let mut est = mlp_init(5);
    // nonzero biases so every parameter block carries a gradient
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    est.b1.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
    est.b2.iter_mut().for_each(|b| *b = rng.gen_range(-0.5..0.5));
    let (_, grad) = backprop(&est, &refs, &ts);
    let analytic = grad.flatten();
    let base = est.params();

    let h = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let i = rng.gen_range(0..base.len());
        let mut p = base.clone();
        p[i] = base[i] + h;
        est.set_params(&p);
        let up = batch_loss(&est, &refs, &ts);
        p[i] = base[i] - h;
        est.set_params(&p);
        let down = batch_loss(&est, &refs, &ts);
        let numeric = (up - down) / (2.0 * h);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    est.set_params(&base);
    assert!(worst < 1e-6, "worst relative error {worst:e}");
}

#[test]
fn standardized_training_channels_are_unit_normal() {
    let ds = dataset();
    let norm = Normalization::fit(&ds.train).unwrap();
    let xs: Vec<Vec<f64>> = ds.train.iter().map(|s| standardize(&s.features, &norm).unwrap().0).collect();
    let count = (xs.len() * WINDOW) as f64;
    for c in 0..6 {
        let vals = || xs.iter().flat_map(|x| x[c * WINDOW..(c + 1) * WINDOW].iter().copied());
        let mean = vals().sum::<f64>() / count;
        let std = (vals().map(|v| (v - mean).powi(2)).sum::<f64>() / count).sqrt();
        assert!(mean.abs() < 1e-9, "channel {c}: mean {mean:e}");
        assert!((std - 1.0).abs() < 1e-6, "channel {c}: std {std}");
    }
}

#[test]
fn synthesis_and_training_are_reproducible() {
    let cfg = GaitConfig { strides_per_speed: 10, ..GaitConfig::default() };
    let a = synthesize_gait(&cfg).unwrap();
    assert_eq!(a, synthesize_gait(&cfg).unwrap());
    let tc = TrainConfig { epochs: 2, ..TrainConfig::default() };
    let x = mlp_train(&a, &tc).unwrap();
    let y = mlp_train(&a, &tc).unwrap();
    assert_eq!(x.estimator, y.estimator);
    assert_eq!(x.loss_history, y.loss_history);
    assert_eq!(x.estimator.to_text(), y.estimator.to_text());
}

#[test]
fn default_training_generalizes_to_the_held_out_cadence() {
    let out = trained();
    assert!(out.test_r2 >= 0.99, "test R2 {}", out.test_r2);
    assert!(*out.loss_history.last().unwrap() < out.initial_loss);
}

#[test]
fn smoothed_training_loss_never_rises() {
    let h = &trained().loss_history;
    let smooth: Vec<f64> = h.windows(20).map(|w| w.iter().sum::<f64>() / 20.0).collect();
    for (i, w) in smooth.windows(2).enumerate() {
        assert!(w[1] <= w[0], "window {i}: {} -> {}", w[0], w[1]);
    }
}

#[test]
fn estimates_move_continuously_on_a_walking_stream() {
    let est = &trained().estimator;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let stream = imu_stream(0.95, 20.0, 0.37, 0.02, &mut rng).unwrap();
    let phases: Vec<f64> = (WINDOW - 1..stream.len())
        .map(|k| est.estimate(&stream.window(k).unwrap()).unwrap().phase_pct)
        .collect();
    let mut wraps = 0;
    for w in phases.windows(2) {
        // circular distance treats 99 -> 1 as a 2% step
        let step = phase_error_pct(w[1], w[0]).abs();
        assert!(step <= 15.0, "{} -> {}", w[0], w[1]);
        if w[1] < w[0] - 50.0 {
            wraps += 1;
        }
    }
    let cycles = |k: usize| (0.37 + 0.95 * k as f64 / 200.0).floor() as usize;
    assert_eq!(wraps, cycles(stream.len() - 1) - cycles(WINDOW - 1));
}

fn table_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::btree_set(0u32..1000, 8..40).prop_flat_map(|phases| {
        let n = phases.len();
        prop::collection::vec(-30.0..30.0f64, n).prop_map(move |torques| {
            phases.iter().zip(torques).map(|(p, t)| (*p as f64 / 10.0, t)).collect()
        })
    })
}

proptest! {
    #[test]
    fn lookup_is_continuous_across_the_wrap(table in table_strategy(), scale in -3.0..3.0f64) {
        let p = TorqueProfile::new(ProfileKind::Custom, table, scale).unwrap();
        let at_zero = profile_torque(&p, 0.0).unwrap();
        let eps = 1e-9;
        let before_wrap = profile_torque(&p, 100.0 - eps).unwrap();
        // the wrap segment spans at least 0.1%, so its slope is bounded
        let max_slope = 60.0 * scale.abs() / 0.1;
        prop_assert!((at_zero - before_wrap).abs() <= max_slope * eps * 2.0 + 1e-12);
    }

    #[test]
    fn lookup_scales_linearly(table in table_strategy(), scale in -3.0..3.0f64, phase in 0.0..100.0f64) {
        let unit = TorqueProfile::new(ProfileKind::Custom, table.clone(), 1.0).unwrap();
        let scaled = TorqueProfile::new(ProfileKind::Custom, table, scale).unwrap();
        let a = profile_torque(&unit, phase).unwrap();
        let b = profile_torque(&scaled, phase).unwrap();
        prop_assert!((b - scale * a).abs() <= 1e-12 * (1.0 + a.abs() * scale.abs()));
    }

    #[test]
    fn lookup_stays_within_bracketing_values(table in table_strategy(), phase in 0.0..100.0f64) {
        let p = TorqueProfile::new(ProfileKind::Custom, table.clone(), 1.0).unwrap();
        let v = profile_torque(&p, phase).unwrap();
        let lo = table.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
        let hi = table.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
    }
}

#[test]
fn builtin_profiles_are_periodic() {
    for p in [TorqueProfile::walking(), TorqueProfile::squatting()] {
        let a = profile_torque(&p, 0.0).unwrap();
        let b = profile_torque(&p, 100.0 - 1e-9).unwrap();
        assert!((a - b).abs() < 1e-6, "{}: {a} vs {b}", p.kind);
    }
}
