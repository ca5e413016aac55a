//! The 2D optical world of the Y-shaped sensor.
//!
//! World coordinates: `x` lateral (left receiver at negative `x`), `y` along
//! the stem. The stem's minor base lies on `y = 0` between `x = ±minor/2`;
//! its centre is the pivot of the lens+emitter rotation. With a lens, the
//! oval rim coincides with the base corners and the apex protrudes towards
//! the emitter (`y < 0`); without a lens the entrance face is the flat base.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::geom::{Polygon, Rotation, Segment, Vec2};
use crate::lensdesign::{solve_profile, LensProfile, LensSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensorParams {
    pub stem_length_mm: f64,
    pub arm_length_mm: f64,
    pub minor_base_mm: f64,
    pub major_base_mm: f64,
    pub arm_width_mm: f64,
    /// Quadratic coefficient of the stem half-width `w(y) = minor/2 + c·y + a·y²`.
    pub smoothing_a: f64,
    pub fork_half_angle_deg: f64,
    pub stem_side_segments: usize,
    pub emitter_distance_mm: f64,
    pub ambient_index: f64,
    pub polymer_index: f64,
}

impl Default for SensorParams {
    fn default() -> Self {
        Self {
            stem_length_mm: 16.2,
            arm_length_mm: 22.2,
            minor_base_mm: 4.0,
            major_base_mm: 6.2,
            arm_width_mm: 3.0,
            smoothing_a: -0.004,
            fork_half_angle_deg: 25.0,
            stem_side_segments: 32,
            emitter_distance_mm: 1.0,
            ambient_index: 1.0,
            polymer_index: 1.44,
        }
    }
}

impl SensorParams {
    /// Lens spec consistent with this sensor: spans the minor base, emitter
    /// at the configured distance, ambient index as `n1`.
    pub fn lens_spec(&self, design_index: f64, focal_distance_mm: f64, sample_count: usize) -> LensSpec {
        LensSpec {
            n1: self.ambient_index,
            n2: design_index,
            s_mm: self.emitter_distance_mm,
            s_prime_mm: focal_distance_mm,
            half_aperture_mm: self.minor_base_mm / 2.0,
            sample_count,
        }
    }

    /// Linear coefficient of the stem half-width so that `w(stem) = major/2`.
    fn stem_linear_coefficient(&self) -> f64 {
        let l = self.stem_length_mm;
        (self.major_base_mm / 2.0 - self.minor_base_mm / 2.0 - self.smoothing_a * l * l) / l
    }

    pub fn stem_half_width(&self, y: f64) -> f64 {
        self.minor_base_mm / 2.0 + self.stem_linear_coefficient() * y + self.smoothing_a * y * y
    }

    fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for (name, v) in [
            ("stem_length_mm", self.stem_length_mm),
            ("arm_length_mm", self.arm_length_mm),
            ("minor_base_mm", self.minor_base_mm),
            ("major_base_mm", self.major_base_mm),
            ("arm_width_mm", self.arm_width_mm),
            ("emitter_distance_mm", self.emitter_distance_mm),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("{name} = {v} must be positive"));
            }
        }
        if !(self.arm_width_mm < self.major_base_mm) {
            problems.push(format!(
                "arm_width_mm = {} must be smaller than major_base_mm = {}",
                self.arm_width_mm, self.major_base_mm
            ));
        }
        if !(self.fork_half_angle_deg > 0.0 && self.fork_half_angle_deg < 90.0) {
            problems.push(format!(
                "fork_half_angle_deg = {} must lie in (0, 90)",
                self.fork_half_angle_deg
            ));
        }
        if self.stem_side_segments < 1 {
            problems.push("stem_side_segments must be ≥ 1".into());
        }
        if !(self.ambient_index >= 1.0) {
            problems.push(format!("ambient_index = {} must be ≥ 1", self.ambient_index));
        }
        if !(self.polymer_index > self.ambient_index) {
            problems.push(format!(
                "polymer_index = {} must exceed ambient_index = {}",
                self.polymer_index, self.ambient_index
            ));
        }
        if problems.is_empty() && self.stem_half_width(self.stem_length_mm / 2.0) <= 0.0 {
            problems.push("stem half-width becomes non-positive; check smoothing_a".into());
        }
        problems
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EdgeKind {
    Wall,
    Receiver(Side),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryEdge {
    pub segment: Segment,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Medium {
    Ambient,
    Polymer,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMap {
    pub ambient_index: f64,
    pub polymer_index: f64,
}

impl RegionMap {
    pub fn index(&self, medium: Medium) -> f64 {
        match medium {
            Medium::Ambient => self.ambient_index,
            Medium::Polymer => self.polymer_index,
        }
    }
}

/// Position plus unit axis. The lateral direction is the axis turned
/// clockwise, so it is `+x` when the axis is `+y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub origin: Vec2,
    pub axis: Vec2,
}

impl Frame {
    pub fn lateral(&self) -> Vec2 {
        Vec2::new(self.axis.y, -self.axis.x)
    }

    pub fn to_world(&self, u: f64, w: f64) -> Vec2 {
        self.origin + self.lateral() * u + self.axis * w
    }

    pub fn to_local(&self, p: Vec2) -> (f64, f64) {
        let d = p - self.origin;
        (d.dot(self.lateral()), d.dot(self.axis))
    }

    pub fn vector_to_local(&self, v: Vec2) -> (f64, f64) {
        (v.dot(self.lateral()), v.dot(self.axis))
    }

    pub fn vector_to_world(&self, u: f64, w: f64) -> Vec2 {
        self.lateral() * u + self.axis * w
    }

    fn rotated(&self, r: &Rotation) -> Frame {
        Frame {
            origin: r.apply(self.origin),
            axis: r.rotate_vector(self.axis),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FaceKind {
    /// Implicit Cartesian oval; the profile is kept for outlines and export.
    Lens { spec: LensSpec, profile: LensProfile },
    Flat,
}

/// The polymer interface facing the emitter. `frame.origin` is the lens apex
/// (or the flat face centre) and `frame.axis` points into the polymer.
#[derive(Debug, Clone, PartialEq)]
pub struct EntranceFace {
    pub kind: FaceKind,
    pub frame: Frame,
    pub half_width_mm: f64,
    /// Local `w` of the rim (oval sag at the aperture edge; 0 when flat).
    pub rim_sag_mm: f64,
}

impl EntranceFace {
    pub fn rim(&self) -> [Vec2; 2] {
        [
            self.frame.to_world(-self.half_width_mm, self.rim_sag_mm),
            self.frame.to_world(self.half_width_mm, self.rim_sag_mm),
        ]
    }

    pub fn lens_spec(&self) -> Option<&LensSpec> {
        match &self.kind {
            FaceKind::Lens { spec, .. } => Some(spec),
            FaceKind::Flat => None,
        }
    }

    /// World-space vertices from the left rim to the right rim.
    pub fn outline(&self) -> Vec<Vec2> {
        match &self.kind {
            FaceKind::Lens { profile, .. } => profile
                .points
                .iter()
                .map(|p| self.frame.to_world(p.x_mm, p.z_mm))
                .collect(),
            FaceKind::Flat => self.rim().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emitter {
    pub position: Vec2,
    pub axis: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub theta_deg: f64,
    pub pivot: Vec2,
}

impl Pose {
    pub fn new(theta_deg: f64, pivot: Vec2) -> Result<Self> {
        if !(theta_deg.abs() <= 90.0) {
            return Err(Error::validation(format!(
                "rotation {theta_deg}° exceeds ±90°"
            )));
        }
        Ok(Self { theta_deg, pivot })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorGeometry {
    pub params: SensorParams,
    pub regions: RegionMap,
    /// Fixed waveguide walls and receivers, from the right base corner to the
    /// left base corner.
    pub body: Vec<BoundaryEdge>,
    /// Left and right ends of the minor base.
    pub base_corners: [Vec2; 2],
    pub receivers: [Segment; 2],
    pub entrance: EntranceFace,
    pub emitter: Emitter,
    pub pivot: Vec2,
    pub fork_y_mm: f64,
    pub crotch: Vec2,
    /// Accumulated rotation of lens and emitter, degrees.
    pub theta_deg: f64,
    outline: Polygon,
}

impl SensorGeometry {
    pub fn receiver(&self, side: Side) -> Segment {
        match side {
            Side::Left => self.receivers[0],
            Side::Right => self.receivers[1],
        }
    }

    /// Straight segments joining the entrance rim to the base corners; empty
    /// entries are omitted.
    pub fn closure_segments(&self) -> Vec<Segment> {
        let rim = self.entrance.rim();
        [
            Segment::new(self.base_corners[0], rim[0]),
            Segment::new(rim[1], self.base_corners[1]),
        ]
        .into_iter()
        .filter(|s| s.length() > 0.0)
        .collect()
    }

    /// Closed polymer outline with the entrance face sampled.
    pub fn outline(&self) -> &Polygon {
        &self.outline
    }

    pub fn classify_point(&self, p: Vec2) -> Medium {
        if self.outline.contains(p) {
            Medium::Polymer
        } else {
            Medium::Ambient
        }
    }

    pub fn has_lens(&self) -> bool {
        matches!(self.entrance.kind, FaceKind::Lens { .. })
    }

    /// Rotates only the lens (entrance face) and the emitter about the pose
    /// pivot; walls and receivers stay put.
    pub fn apply_pose(&self, pose: &Pose) -> SensorGeometry {
        let r = Rotation::from_degrees(pose.theta_deg, pose.pivot);
        if r.is_identity() {
            return self.clone();
        }
        let mut g = self.clone();
        g.entrance.frame = self.entrance.frame.rotated(&r);
        g.emitter = Emitter {
            position: r.apply(self.emitter.position),
            axis: r.rotate_vector(self.emitter.axis),
        };
        g.theta_deg = self.theta_deg + pose.theta_deg;
        g.outline = assemble_outline(&g.body, &g.base_corners, &g.entrance);
        g
    }

    /// Rotation about the centre of the stem's minor base.
    pub fn posed(&self, theta_deg: f64) -> Result<SensorGeometry> {
        Ok(self.apply_pose(&Pose::new(theta_deg, self.pivot)?))
    }

    /// Same sensor with the lens replaced by a flat face flush with the
    /// minor base.
    pub fn without_lens(&self) -> Result<SensorGeometry> {
        build_sensor(&self.params, None, Execution::Sequential)
    }
}

fn assemble_outline(body: &[BoundaryEdge], corners: &[Vec2; 2], entrance: &EntranceFace) -> Polygon {
    let mut vertices: Vec<Vec2> = body.iter().map(|e| e.segment.a).collect();
    vertices.push(corners[0]);
    for p in entrance.outline() {
        if vertices.last() != Some(&p) {
            vertices.push(p);
        }
    }
    if vertices.first() == vertices.last() {
        vertices.pop();
    }
    Polygon::new(vertices)
}

/// Builds the Y outline from `params` and, when given, a lens spanning the
/// minor base. The lens must use the sensor's emitter distance, ambient index
/// and half the minor base as its aperture.
pub fn build_sensor(params: &SensorParams, lens: Option<&LensSpec>, exec: Execution) -> Result<SensorGeometry> {
    let mut problems = params.validate();
    if let Some(spec) = lens {
        if let Err(Error::Validation(p)) = spec.validate() {
            problems.extend(p);
        }
        if spec.half_aperture_mm != params.minor_base_mm / 2.0 {
            problems.push(format!(
                "lens half aperture {} mm must equal half the minor base ({} mm)",
                spec.half_aperture_mm,
                params.minor_base_mm / 2.0
            ));
        }
        if spec.s_mm != params.emitter_distance_mm {
            problems.push(format!(
                "lens emitter distance s = {} mm must equal emitter_distance_mm = {}",
                spec.s_mm, params.emitter_distance_mm
            ));
        }
        if spec.n1 != params.ambient_index {
            problems.push(format!(
                "lens n1 = {} must equal ambient_index = {}",
                spec.n1, params.ambient_index
            ));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    let half_minor = params.minor_base_mm / 2.0;
    let half_major = params.major_base_mm / 2.0;
    let stem = params.stem_length_mm;
    let phi = params.fork_half_angle_deg.to_radians();
    let (sin_phi, cos_phi) = phi.sin_cos();
    let width = params.arm_width_mm;

    // Right half of the body; the left half is its exact mirror image.
    let n = params.stem_side_segments;
    let mut stem_side: Vec<Vec2> = (0..=n)
        .map(|j| {
            let y = stem * j as f64 / n as f64;
            Vec2::new(params.stem_half_width(y), y)
        })
        .collect();
    stem_side[0] = Vec2::new(half_minor, 0.0);
    stem_side[n] = Vec2::new(half_major, stem);

    let fork = stem_side[n];
    let arm_dir = Vec2::new(sin_phi, cos_phi);
    let inward = Vec2::new(-cos_phi, sin_phi);
    let outer_end = fork + arm_dir * params.arm_length_mm;
    let inner_end = outer_end + inward * width;
    // Inner edge meets the axis at fork + width·inward + t·arm_dir.
    let t_crotch = (width * cos_phi - half_major) / sin_phi;
    if t_crotch >= params.arm_length_mm {
        return Err(Error::validation(format!(
            "arms too short for the fork: inner edges meet {t_crotch:.3} mm along the arm"
        )));
    }
    let crotch = Vec2::new(0.0, stem + width * sin_phi + t_crotch * cos_phi);

    let mut right_chain = stem_side;
    right_chain.push(outer_end);
    right_chain.push(inner_end);
    let left_chain: Vec<Vec2> = right_chain.iter().map(|p| p.mirror_x()).collect();

    let mut body = Vec::new();
    let mut push = |a: Vec2, b: Vec2, kind: EdgeKind| body.push(BoundaryEdge { segment: Segment::new(a, b), kind });
    for w in right_chain.windows(2) {
        let kind = if w[0] == outer_end {
            EdgeKind::Receiver(Side::Right)
        } else {
            EdgeKind::Wall
        };
        push(w[0], w[1], kind);
    }
    push(inner_end, crotch, EdgeKind::Wall);
    push(crotch, inner_end.mirror_x(), EdgeKind::Wall);
    for w in left_chain.windows(2).rev() {
        let kind = if w[0] == outer_end.mirror_x() {
            EdgeKind::Receiver(Side::Left)
        } else {
            EdgeKind::Wall
        };
        push(w[1], w[0], kind);
    }

    let base_corners = [Vec2::new(-half_minor, 0.0), Vec2::new(half_minor, 0.0)];
    let axis = Vec2::new(0.0, 1.0);
    let entrance = match lens {
        Some(spec) => {
            let profile = solve_profile(spec, exec)?;
            let sag = profile.edge_sag_mm();
            EntranceFace {
                kind: FaceKind::Lens {
                    spec: *spec,
                    profile,
                },
                frame: Frame {
                    origin: Vec2::new(0.0, -sag),
                    axis,
                },
                half_width_mm: half_minor,
                rim_sag_mm: sag,
            }
        }
        None => EntranceFace {
            kind: FaceKind::Flat,
            frame: Frame {
                origin: Vec2::new(0.0, 0.0),
                axis,
            },
            half_width_mm: half_minor,
            rim_sag_mm: 0.0,
        },
    };
    let emitter = Emitter {
        position: entrance.frame.origin - axis * params.emitter_distance_mm,
        axis,
    };
    let outline = assemble_outline(&body, &base_corners, &entrance);
    if !outline.is_simple() {
        return Err(Error::validation(
            "sensor outline self-intersects; check fork angle and arm dimensions",
        ));
    }

    Ok(SensorGeometry {
        params: *params,
        regions: RegionMap {
            ambient_index: params.ambient_index,
            polymer_index: params.polymer_index,
        },
        body,
        base_corners,
        receivers: [
            Segment::new(outer_end.mirror_x(), inner_end.mirror_x()),
            Segment::new(outer_end, inner_end),
        ],
        entrance,
        emitter,
        pivot: Vec2::new(0.0, 0.0),
        fork_y_mm: stem,
        crotch,
        theta_deg: 0.0,
        outline,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_lensed() -> SensorGeometry {
        let params = SensorParams::default();
        let spec = params.lens_spec(1.44, 20.0, 2001);
        build_sensor(&params, Some(&spec), Execution::Sequential).unwrap()
    }

    fn max_mirror_error(vertices: &[Vec2]) -> f64 {
        vertices
            .iter()
            .map(|v| {
                let m = v.mirror_x();
                vertices.iter().map(|w| w.distance(m)).fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn default_outline_is_simple_and_symmetric() {
        for g in [default_lensed(), default_lensed().without_lens().unwrap()] {
            assert!(g.outline().is_simple());
            assert!(g.outline().signed_area() > 0.0);
            assert!(max_mirror_error(&g.outline().vertices) <= 1e-12);
            let [l, r] = g.receivers;
            assert_eq!(l.a, r.a.mirror_x());
            assert_eq!(l.b, r.b.mirror_x());
            assert_eq!(g.emitter.position.x, 0.0);
            assert_eq!(g.emitter.axis, Vec2::new(0.0, 1.0));
        }
    }

    #[test]
    fn fork_at_stem_length() {
        let g = default_lensed();
        let fork = g.body.iter().map(|e| e.segment.b).find(|p| p.y == 16.2).unwrap();
        assert_eq!(fork, Vec2::new(3.1, 16.2));
        assert_eq!(g.fork_y_mm, 16.2);
        assert!(g.crotch.y > g.fork_y_mm);
        for r in g.receivers {
            assert!((r.length() - 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lens_rim_meets_base_corners() {
        let g = default_lensed();
        assert_eq!(g.entrance.rim(), g.base_corners);
        assert!(g.closure_segments().is_empty());
        let apex = g.entrance.frame.origin;
        assert!((apex.y + 1.810_852_142).abs() < 1e-8);
        assert!((g.emitter.position.distance(apex) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn degenerate_fork_rejected() {
        let params = SensorParams {
            arm_width_mm: 6.2,
            ..SensorParams::default()
        };
        match build_sensor(&params, None, Execution::Sequential) {
            Err(Error::Validation(p)) => assert!(p.iter().any(|m| m.contains("arm_width_mm"))),
            other => panic!("{other:?}"),
        }
        let bad = SensorParams {
            stem_length_mm: -1.0,
            polymer_index: 0.5,
            ..SensorParams::default()
        };
        match build_sensor(&bad, None, Execution::Sequential) {
            Err(Error::Validation(p)) => assert!(p.len() >= 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lens_must_match_sensor() {
        let params = SensorParams::default();
        let spec = LensSpec {
            half_aperture_mm: 1.5,
            ..params.lens_spec(1.44, 20.0, 101)
        };
        assert!(build_sensor(&params, Some(&spec), Execution::Sequential).is_err());
    }

    #[test]
    fn pose_identity_and_inverse() {
        let g = default_lensed();
        assert_eq!(g.posed(0.0).unwrap(), g);
        let back = g.posed(3.0).unwrap().posed(-3.0).unwrap();
        assert!(back.emitter.position.distance(g.emitter.position) < 1e-12);
        assert!(back.entrance.frame.origin.distance(g.entrance.frame.origin) < 1e-12);
        assert!(back.entrance.frame.axis.distance(g.entrance.frame.axis) < 1e-12);
        assert!(g.posed(91.0).is_err());
    }

    #[test]
    fn pose_composes() {
        let g = default_lensed();
        let a = g.posed(1.25).unwrap().posed(1.75).unwrap();
        let b = g.posed(3.0).unwrap();
        assert!(a.emitter.position.distance(b.emitter.position) < 1e-12);
        assert!(a.entrance.frame.origin.distance(b.entrance.frame.origin) < 1e-12);
        assert!(a.emitter.axis.distance(b.emitter.axis) < 1e-12);
    }

    #[test]
    fn negative_pose_tilts_towards_right() {
        let g = default_lensed();
        let p = g.posed(-3.0).unwrap();
        let tilt = p.emitter.axis.x.atan2(p.emitter.axis.y).to_degrees();
        assert!((tilt - 3.0).abs() < 1e-12, "{tilt}");
        let apex0 = g.entrance.frame.origin;
        let apex = p.entrance.frame.origin;
        let expected = apex0.distance(g.pivot) * 2.0 * 1.5f64.to_radians().sin();
        assert!((apex.distance(apex0) - expected).abs() < 1e-12);
        assert!((p.emitter.position.distance(apex) - 1.0).abs() < 1e-12);
        assert_eq!(p.body, g.body);
        assert_eq!(p.receivers, g.receivers);
        assert!(p.outline().is_simple());
        for s in p.closure_segments() {
            assert!(s.length() < 0.11);
        }
    }

    #[test]
    fn classification() {
        let g = default_lensed();
        assert_eq!(g.classify_point(Vec2::new(0.0, 8.0)), Medium::Polymer);
        assert_eq!(g.classify_point(Vec2::new(100.0, 100.0)), Medium::Ambient);
        assert_eq!(g.classify_point(g.emitter.position), Medium::Ambient);
        let arm_mid = g.receivers[0].midpoint() + Vec2::new(0.5, -1.0);
        assert_eq!(g.classify_point(arm_mid), Medium::Polymer);
        assert_eq!(g.classify_point(g.crotch + Vec2::new(0.0, 1.0)), Medium::Ambient);
    }
}
