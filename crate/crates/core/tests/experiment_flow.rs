use lensguide::experiment::{
    compare_with_without_lens, crop_and_fold, rotation_sweep, synthesize_protocol, FirstDirection, Phase,
    ProtocolParams, ReadoutModel,
};
use lensguide::lensdesign::LensSpec;
use lensguide::raytrace::{FanParams, TraceLimits};
use lensguide::report;
use lensguide::scene::{build_sensor, SensorGeometry, SensorParams};
use lensguide::Execution;

fn lensed() -> SensorGeometry {
    build_sensor(&SensorParams::default(), Some(&LensSpec::default()), Execution::Sequential).unwrap()
}

#[test]
fn sweep_switches_sign_and_is_antisymmetric() {
    let thetas: Vec<f64> = (-12..=12).map(|i| i as f64 * 0.25).collect();
    let s = rotation_sweep(&lensed(), &thetas, &FanParams::default(), &TraceLimits::default(), Execution::Parallel)
        .unwrap();
    assert_eq!(s.rows.len(), thetas.len());
    let d0 = s.at(0.0).unwrap().differential().unwrap();
    assert!(d0.abs() <= 1e-9);
    let minus = s.at(-3.0).unwrap();
    let plus = s.at(3.0).unwrap();
    assert!(minus.right_power > minus.left_power);
    assert!(plus.left_power > plus.right_power);
    for &t in &thetas {
        let a = s.at(t).unwrap().differential().unwrap();
        let b = s.at(-t).unwrap().differential().unwrap();
        assert!((a + b).abs() <= 1e-9, "θ={t}: {a} vs {b}");
    }
}

#[test]
fn lens_dominates_flat_face() {
    let r = compare_with_without_lens(
        &SensorParams::default(),
        &LensSpec::default(),
        &[-3.0, 0.0, 3.0],
        &FanParams::default(),
        &TraceLimits::default(),
        Execution::Parallel,
    )
    .unwrap();
    for row in r.rows.iter().filter(|r| r.theta_deg != 0.0) {
        assert!(row.with_lens.unwrap().abs() > row.without_lens.unwrap().abs());
    }
    assert!(r.headline_ratio().unwrap() >= 5.0);
    let csv = report::comparison_csv(&r).unwrap();
    assert_eq!(csv.lines().count(), 4);
}

fn protocol(first: FirstDirection) -> lensguide::experiment::ProtocolTrace {
    let p = ProtocolParams {
        first_direction: first,
        ..ProtocolParams::default()
    };
    synthesize_protocol(
        &lensed(),
        &ReadoutModel::default(),
        &p,
        &FanParams::default(),
        &TraceLimits::default(),
        Execution::Parallel,
    )
    .unwrap()
}

#[test]
fn protocol_shape_and_fold() {
    let trace = protocol(FirstDirection::Negative);
    assert_eq!(trace.samples.len(), 1440);
    assert_eq!(trace.cycle_count, 6);
    let last = trace.samples.last().unwrap();
    assert!((last.time_s + 0.01 - 14.4).abs() < 1e-9);
    for c in 0..6 {
        assert_eq!(trace.samples.iter().filter(|s| s.cycle == c).count(), 240);
    }
    // Right rotation: right receiver brightens, so its voltage dips.
    let hold_right = trace
        .samples
        .iter()
        .find(|s| s.phase == Phase::Hold && s.theta_deg < 0.0)
        .unwrap();
    let rest = trace.samples.iter().find(|s| s.theta_deg == 0.0).unwrap();
    assert!(hold_right.right_voltage < rest.right_voltage);
    assert!(hold_right.left_voltage > rest.left_voltage);

    let folded = crop_and_fold(&trace, 1).unwrap();
    assert_eq!(folded.cycles_used, 5);
    for r in &folded.rows {
        assert_eq!(r.left_std, 0.0);
        assert_eq!(r.right_std, 0.0);
    }
    let m3 = folded.at(-3.0).unwrap();
    let p3 = folded.at(3.0).unwrap();
    assert!(m3.right_mean < m3.left_mean);
    assert!(p3.left_mean < p3.right_mean);

    assert_eq!(trace, protocol(FirstDirection::Negative));
}

#[test]
fn mirrored_protocol_swaps_curves() {
    let a = crop_and_fold(&protocol(FirstDirection::Negative), 1).unwrap();
    let b = crop_and_fold(&protocol(FirstDirection::Positive), 1).unwrap();
    assert_eq!(a.rows.len(), b.rows.len());
    for ra in &a.rows {
        let rb = b.at(-ra.theta_deg).unwrap();
        assert!((ra.left_mean - rb.right_mean).abs() <= 1e-9);
        assert!((ra.right_mean - rb.left_mean).abs() <= 1e-9);
    }
}

#[test]
fn outputs_independent_of_thread_count() {
    let scene = lensed();
    let thetas = [-3.0, -1.5, 0.0, 1.5, 3.0];
    let run = |threads| {
        lensguide::exec::with_threads(threads, || {
            let s = rotation_sweep(&scene, &thetas, &FanParams::default(), &TraceLimits::default(), Execution::Parallel)
                .unwrap();
            report::sweep_csv(&s).unwrap()
        })
    };
    let seq = report::sweep_csv(
        &rotation_sweep(&scene, &thetas, &FanParams::default(), &TraceLimits::default(), Execution::Sequential).unwrap(),
    )
    .unwrap();
    for t in [1, 2, 4, 8] {
        assert_eq!(run(t), seq);
    }
}

#[test]
fn discarding_every_cycle_is_refused() {
    let trace = protocol(FirstDirection::Negative);
    assert!(crop_and_fold(&trace, 6).is_err());
}
