use std::sync::OnceLock;

use proptest::prelude::*;
use lensguide::geom::{Rotation, Vec2};
use lensguide::lensdesign::LensSpec;
use lensguide::scene::{build_sensor, EdgeKind, Pose, SensorGeometry, SensorParams, Side};
use lensguide::Execution;

fn lensed() -> SensorGeometry {
    static SCENE: OnceLock<SensorGeometry> = OnceLock::new();
    SCENE
        .get_or_init(|| build_sensor(&SensorParams::default(), Some(&LensSpec::default()), Execution::Sequential).unwrap())
        .clone()
}

fn close(a: Vec2, b: Vec2, tol: f64) -> bool {
    a.distance(b) <= tol
}

#[test]
fn outline_mirror_symmetric_at_rest() {
    let g = lensed();
    let verts = &g.outline().vertices;
    for v in verts {
        let m = v.mirror_x();
        assert!(
            verts.iter().any(|w| close(*w, m, 1e-12)),
            "no mirror partner for {v:?}"
        );
    }
    let l = g.receiver(Side::Left);
    let r = g.receiver(Side::Right);
    assert!(
        (close(l.a.mirror_x(), r.a, 1e-12) && close(l.b.mirror_x(), r.b, 1e-12))
            || (close(l.a.mirror_x(), r.b, 1e-12) && close(l.b.mirror_x(), r.a, 1e-12))
    );
    assert!(l.midpoint().x < 0.0 && r.midpoint().x > 0.0);
    let receivers = g.body.iter().filter(|e| matches!(e.kind, EdgeKind::Receiver(_))).count();
    assert_eq!(receivers, 2);
}

#[test]
fn quoted_dimensions_honoured() {
    let g = lensed();
    let p = g.params;
    assert!((p.stem_half_width(0.0) - 2.0).abs() < 1e-12);
    assert!((p.stem_half_width(16.2) - 3.1).abs() < 1e-12);
    assert!((g.base_corners[0].distance(g.base_corners[1]) - 4.0).abs() < 1e-12);
    assert!((g.receiver(Side::Left).length() - 3.0).abs() < 1e-9);
    assert!(g.outline().is_simple());
    // Closures vanish at rest: the rim sits on the base corners.
    assert!(g.closure_segments().is_empty());
    assert!((g.emitter.position.distance(g.entrance.frame.origin) - 1.0).abs() < 1e-12);
}

#[test]
fn closures_stay_short_at_working_angles() {
    let g = lensed();
    for theta in [-3.0, 3.0] {
        let posed = g.posed(theta).unwrap();
        for c in posed.closure_segments() {
            // Rim displacement is the chord 2·|rim − pivot|·sin(θ/2).
            assert!(c.length() < 0.11, "{}", c.length());
        }
        assert!(posed.outline().is_simple());
    }
}

#[test]
fn pose_range_enforced() {
    assert!(Pose::new(90.5, Vec2::default()).is_err());
    assert!(Pose::new(-90.0, Vec2::default()).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn poses_compose(t1 in -40.0f64..40.0, t2 in -40.0f64..40.0) {
        let g = lensed();
        let a = g.posed(t1).unwrap().posed(t2).unwrap();
        let b = g.posed(t1 + t2).unwrap();
        prop_assert!(close(a.emitter.position, b.emitter.position, 1e-12));
        prop_assert!(close(a.emitter.axis, b.emitter.axis, 1e-12));
        prop_assert!(close(a.entrance.frame.origin, b.entrance.frame.origin, 1e-12));
        let (ra, rb) = (a.entrance.rim(), b.entrance.rim());
        prop_assert!(close(ra[0], rb[0], 1e-12) && close(ra[1], rb[1], 1e-12));
    }

    #[test]
    fn pose_matches_independent_rotation(theta in -30.0f64..30.0) {
        let g = lensed();
        let posed = g.posed(theta).unwrap();
        let (s, c) = theta.to_radians().sin_cos();
        let rot = |p: Vec2| Vec2::new(c * p.x - s * p.y, s * p.x + c * p.y);
        prop_assert!(close(posed.emitter.position, rot(g.emitter.position - g.pivot) + g.pivot, 1e-12));
        prop_assert!(close(posed.entrance.frame.origin, Rotation::from_degrees(theta, g.pivot).apply(g.entrance.frame.origin), 1e-12));
        // Walls and receivers are untouched.
        prop_assert_eq!(&posed.body, &g.body);
    }
}
