use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use lensguide::experiment::rotation_sweep;
use lensguide::lensdesign::{solve_profile, LensSpec};
use lensguide::raytrace::{run_fan, FanParams, TraceLimits};
use lensguide::scene::{build_sensor, SensorParams};
use lensguide::Execution;

fn modes() -> Vec<(&'static str, Execution)> {
    let mut m = vec![("sequential", Execution::Sequential)];
    if Execution::is_parallel_available() {
        m.push(("parallel", Execution::Parallel));
    }
    m
}

fn fan(c: &mut Criterion) {
    let scene = build_sensor(&SensorParams::default(), Some(&LensSpec::default()), Execution::Sequential)
        .unwrap()
        .posed(-3.0)
        .unwrap();
    let fan = FanParams {
        count: 20_000,
        aperture_deg: 120.0,
    };
    let limits = TraceLimits::default();
    let mut group = c.benchmark_group("run_fan_20k");
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_fan(&scene, &fan, &limits, exec).unwrap())
        });
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let scene = build_sensor(&SensorParams::default(), Some(&LensSpec::default()), Execution::Sequential).unwrap();
    let thetas: Vec<f64> = (-30..=30).map(|i| i as f64 * 0.1).collect();
    let fan = FanParams::default();
    let limits = TraceLimits::default();
    let mut group = c.benchmark_group("rotation_sweep_61");
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| rotation_sweep(&scene, &thetas, &fan, &limits, exec).unwrap())
        });
    }
    group.finish();
}

fn profile(c: &mut Criterion) {
    let spec = LensSpec {
        sample_count: 20_001,
        ..LensSpec::default()
    };
    let mut group = c.benchmark_group("solve_profile_20001");
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| solve_profile(&spec, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, fan, sweep, profile);
criterion_main!(benches);
