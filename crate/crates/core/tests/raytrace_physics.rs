//! Physics checks on every traced event: Snell, TIR, Fresnel, conservation
//! and mirror equivariance.

use std::sync::OnceLock;

use proptest::prelude::*;
use lensguide::geom::Vec2;
use lensguide::lensdesign::{oval_gradient, LensSpec};
use lensguide::raytrace::{
    focal_spot, refract_or_reflect, run_fan, trace_fan, tally, FanParams, InteractionKind, SurfaceId,
    TraceLimits, TraceOutcome,
};
use lensguide::scene::{build_sensor, FaceKind, SensorGeometry, SensorParams};
use lensguide::Execution;

fn lensed() -> SensorGeometry {
    static SCENE: OnceLock<SensorGeometry> = OnceLock::new();
    SCENE
        .get_or_init(|| build_sensor(&SensorParams::default(), Some(&LensSpec::default()), Execution::Sequential).unwrap())
        .clone()
}

/// Every refraction obeys Snell with sines measured from the traced path
/// itself; every super-critical hit is TIR with a mirror-reflected direction;
/// lens normals are parallel to the analytic oval gradient.
fn check_events(scene: &SensorGeometry, outcome: &TraceOutcome) {
    for (k, ev) in outcome.events.iter().enumerate() {
        assert_eq!(outcome.path[k + 1], ev.point, "path and events out of step");
        let d_in = (outcome.path[k + 1] - outcome.path[k]).normalized();
        let d_out = ev.interaction.direction;
        let n = ev.normal;
        assert!((n.norm() - 1.0).abs() < 1e-12);
        assert!(d_in.dot(n) < 0.0, "normal must face the incoming ray");
        assert!((d_out.norm() - 1.0).abs() < 1e-12);
        let sin_i = d_in.cross(n).abs();
        match ev.interaction.kind {
            InteractionKind::Refracted => {
                let sin_t = d_out.cross(n).abs();
                assert!(
                    (ev.n_from * sin_i - ev.n_to * sin_t).abs() <= 1e-12,
                    "Snell violated: {} vs {}",
                    ev.n_from * sin_i,
                    ev.n_to * sin_t
                );
                assert!(d_out.dot(n) < 0.0, "refracted ray must cross the surface");
                assert!(sin_i <= ev.critical_sine() + 1e-12);
            }
            InteractionKind::TotalInternalReflection => {
                assert!(ev.n_from > ev.n_to);
                assert!(sin_i > ev.critical_sine() - 1e-12);
                assert_eq!(ev.interaction.transmittance, 0.0);
                let mirror = d_in - n * (2.0 * d_in.dot(n));
                assert!(mirror.distance(d_out) < 1e-12);
            }
        }
        if ev.n_from > ev.n_to && sin_i > ev.critical_sine() + 1e-12 {
            assert_eq!(ev.interaction.kind, InteractionKind::TotalInternalReflection);
        }
        if ev.surface == SurfaceId::Entrance {
            if let FaceKind::Lens { spec, .. } = &scene.entrance.kind {
                let frame = scene.entrance.frame;
                let (u, w) = frame.to_local(ev.point);
                let (gu, gw) = oval_gradient(u, w, spec);
                let g = frame.vector_to_world(gu, gw).normalized();
                assert!(g.cross(n).abs() < 1e-9, "lens normal off the oval gradient");
            }
        }
    }
}

#[test]
fn snell_golden_angle() {
    let d = Vec2::from_angle((-90.0f64 + 30.0).to_radians());
    let i = refract_or_reflect(d, Vec2::new(0.0, 1.0), 1.0, 1.44).unwrap();
    let refr = i.direction.cross(Vec2::new(0.0, -1.0)).abs().asin().to_degrees();
    assert!((refr - 20.317507634832512).abs() < 1e-10);
}

#[test]
fn critical_angle_boundary() {
    let critical = 43.98296313f64;
    let normal = Vec2::new(0.0, -1.0);
    for (deg, kind) in [
        (critical - 1e-4, InteractionKind::Refracted),
        (critical + 1e-4, InteractionKind::TotalInternalReflection),
    ] {
        let d = Vec2::new(deg.to_radians().sin(), deg.to_radians().cos());
        assert_eq!(refract_or_reflect(d, normal, 1.44, 1.0).unwrap().kind, kind, "{deg}");
    }
}

#[test]
fn normal_incidence_fresnel() {
    for n in [1.2, 1.44, 1.7, 2.4] {
        let i = refract_or_reflect(Vec2::new(0.0, 1.0), Vec2::new(0.0, -1.0), 1.0, n).unwrap();
        let r = ((n - 1.0) / (n + 1.0)).powi(2);
        assert!((i.transmittance - (1.0 - r)).abs() < 1e-15);
        assert_eq!(i.direction, Vec2::new(0.0, 1.0));
    }
}

#[test]
fn stigmatic_focus_at_rest() {
    let scene = lensed();
    let spot = focal_spot(&scene, &FanParams::default()).unwrap();
    assert!((spot.depth_mm - 20.0).abs() <= 0.2);
    assert!(spot.radius_mm <= 0.05);
    assert!(spot.center.x.abs() < 1e-9);
}

#[test]
fn every_event_in_default_sweep_is_physical() {
    let scene = lensed();
    let limits = TraceLimits::default();
    for theta in [-10.0, -3.0, 0.0, 3.0, 7.5] {
        let posed = scene.posed(theta).unwrap();
        for o in trace_fan(&posed, &FanParams { count: 401, aperture_deg: 150.0 }, &limits, Execution::Parallel) {
            check_events(&posed, &o);
        }
        let flat = scene.without_lens().unwrap().posed(theta).unwrap();
        for o in trace_fan(&flat, &FanParams::default(), &limits, Execution::Parallel) {
            check_events(&flat, &o);
        }
    }
}

#[test]
fn sequential_and_parallel_tallies_identical() {
    let scene = lensed().posed(-2.25).unwrap();
    let fan = FanParams { count: 2001, aperture_deg: 120.0 };
    let limits = TraceLimits::default();
    let a = run_fan(&scene, &fan, &limits, Execution::Sequential).unwrap();
    let b = lensguide::exec::with_threads(3, || run_fan(&scene, &fan, &limits, Execution::Parallel).unwrap());
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn refraction_kernel_properties(
        angle in -89.0f64..89.0,
        tilt in -std::f64::consts::PI..std::f64::consts::PI,
        n_from in 1.0f64..2.0,
        n_to in 1.0f64..2.0,
    ) {
        let normal = Vec2::from_angle(tilt);
        let d = Vec2::from_angle(tilt + std::f64::consts::PI + angle.to_radians());
        let i = refract_or_reflect(d, normal, n_from, n_to).unwrap();
        prop_assert!((i.direction.norm() - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&i.transmittance));
        let sin_i = d.cross(normal).abs();
        if i.kind == InteractionKind::Refracted {
            prop_assert!((n_from * sin_i - n_to * i.direction.cross(normal).abs()).abs() <= 1e-12);
            // Reciprocity: the reverse ray sees the same transmittance.
            let back = refract_or_reflect(-i.direction, -normal, n_to, n_from).unwrap();
            prop_assert_eq!(back.kind, InteractionKind::Refracted);
            prop_assert!((back.transmittance - i.transmittance).abs() < 1e-9);
            prop_assert!(back.direction.distance(-d) < 1e-9);
        } else {
            prop_assert!(n_from * sin_i > n_to);
        }
    }

    #[test]
    fn conservation_and_mirror_equivariance(
        theta in 0.0f64..12.0,
        count in 2usize..300,
        aperture in 10.0f64..170.0,
        bulk in prop_oneof![Just(0.0), 0.0f64..0.5],
    ) {
        let scene = lensed();
        let fan = FanParams { count, aperture_deg: aperture };
        let limits = TraceLimits { bulk_absorption_per_mm: bulk, ..TraceLimits::default() };
        let plus = scene.posed(theta).unwrap();
        let minus = scene.posed(-theta).unwrap();
        let outcomes = trace_fan(&plus, &fan, &limits, Execution::Sequential);
        for o in &outcomes {
            check_events(&plus, o);
        }
        let tp = tally(&outcomes);
        let tm = run_fan(&minus, &fan, &limits, Execution::Sequential).unwrap();
        prop_assert!(tp.conservation_error() <= 1e-9);
        prop_assert!(tm.conservation_error() <= 1e-9);
        prop_assert!((tp.emitted_power - 1.0).abs() <= 1e-9);
        prop_assert_eq!(tp.left.ray_count, tm.right.ray_count);
        prop_assert_eq!(tp.right.ray_count, tm.left.ray_count);
        prop_assert!((tp.left.power - tm.right.power).abs() <= 1e-9);
        prop_assert!((tp.right.power - tm.left.power).abs() <= 1e-9);
    }
}
