//! Deterministic 2D ray tracer for the sensor scene.
//!
//! Rays leave the emitter in the ambient medium, refract into the polymer at
//! the first interface they meet and are then followed through total internal
//! reflections until they reach a receiver, leave the polymer, fall below the
//! power floor or exhaust the bounce budget. Partially reflecting interfaces
//! do not split rays: the transmitted branch is followed and the reflected
//! fraction is booked as escaped power.

use serde::{Deserialize, Serialize};

use crate::error::{DomainError, Error, Result};
use crate::exec::Execution;
use crate::geom::{Segment, Vec2};
use crate::lensdesign::{oval_gradient, oval_residual, LensSpec, MAX_BISECTION_ITERATIONS};
use crate::scene::{EdgeKind, EntranceFace, FaceKind, Medium, SensorGeometry, Side};

/// Residual tolerance (mm of optical path) for lens intersections.
pub const INTERSECTION_TOLERANCE_MM: f64 = 1e-9;
/// Distance a ray origin is advanced after each surface event.
pub const SURFACE_NUDGE_MM: f64 = 1e-7;
/// Sub-intervals used to bracket the first lens crossing along a ray.
const LENS_SCAN_STEPS: usize = 128;
/// Margin of the lens-local search box around the oval cap.
const LENS_BOX_MARGIN_MM: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FanParams {
    pub count: usize,
    pub aperture_deg: f64,
}

impl Default for FanParams {
    /// 100 rays over a 120° cone.
    fn default() -> Self {
        Self {
            count: 100,
            aperture_deg: 120.0,
        }
    }
}

impl FanParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.count < 1 {
            problems.push("fan count must be ≥ 1".to_string());
        }
        if !(self.aperture_deg > 0.0 && self.aperture_deg <= 180.0) {
            problems.push(format!("fan aperture {}° must lie in (0, 180]", self.aperture_deg));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceLimits {
    pub max_bounces: usize,
    pub power_floor: f64,
    /// Optional bulk attenuation inside the polymer, 1/mm.
    pub bulk_absorption_per_mm: f64,
}

impl Default for TraceLimits {
    fn default() -> Self {
        Self {
            max_bounces: 200,
            power_floor: 1e-4,
            bulk_absorption_per_mm: 0.0,
        }
    }
}

impl TraceLimits {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.max_bounces < 1 {
            problems.push("max_bounces must be ≥ 1".to_string());
        }
        if !(self.power_floor > 0.0 && self.power_floor.is_finite()) {
            problems.push(format!("power_floor {} must be positive", self.power_floor));
        }
        if !(self.bulk_absorption_per_mm >= 0.0 && self.bulk_absorption_per_mm.is_finite()) {
            problems.push(format!(
                "bulk_absorption_per_mm {} must be ≥ 0",
                self.bulk_absorption_per_mm
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Vec2,
    pub direction: Vec2,
    pub power: f64,
    pub medium: Medium,
    pub bounce_count: usize,
}

/// Uniform angular fan about the emitter axis, endpoints included. Ray `k`
/// and ray `count − 1 − k` are mirror images about the axis.
pub fn emit_fan(position: Vec2, axis: Vec2, fan: &FanParams) -> Vec<Ray> {
    let count = fan.count.max(1);
    let half = 0.5 * fan.aperture_deg.to_radians();
    let power = 1.0 / count as f64;
    let left = axis.perp();
    (0..count)
        .map(|k| {
            let angle = if count == 1 {
                0.0
            } else {
                // Integer numerator keeps mirrored angles exact negatives.
                half * (2.0 * k as f64 - (count - 1) as f64) / (count - 1) as f64
            };
            let (s, c) = angle.sin_cos();
            Ray {
                origin: position,
                direction: axis * c + left * s,
                power,
                medium: Medium::Ambient,
                bounce_count: 0,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InteractionKind {
    Refracted,
    TotalInternalReflection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub direction: Vec2,
    pub kind: InteractionKind,
    /// Unpolarised Fresnel power transmittance; 0 under total internal
    /// reflection, where the full power continues on the reflected ray.
    pub transmittance: f64,
    pub sin_incidence: f64,
    pub sin_refraction: f64,
}

/// Snell refraction or total internal reflection at an interface whose unit
/// `normal` faces the incoming unit `direction`.
pub fn refract_or_reflect(
    direction: Vec2,
    normal: Vec2,
    n_from: f64,
    n_to: f64,
) -> Result<Interaction, DomainError> {
    let cos_i = -direction.dot(normal);
    if !(cos_i > 0.0) {
        return Err(DomainError::DegenerateNormal(-cos_i));
    }
    let cos_i = cos_i.min(1.0);
    let sin_i = direction.cross(normal).abs().min(1.0);
    let eta = n_from / n_to;
    let sin_t = eta * sin_i;
    if sin_t > 1.0 {
        let reflected = (direction + normal * (2.0 * cos_i)).normalized();
        return Ok(Interaction {
            direction: reflected,
            kind: InteractionKind::TotalInternalReflection,
            transmittance: 0.0,
            sin_incidence: sin_i,
            sin_refraction: f64::NAN,
        });
    }
    let cos_t = (1.0 - sin_t * sin_t).sqrt();
    // Tangential component scaled by eta, normal component set from cos_t;
    // the refracted direction is unit by construction.
    let tangent = direction + normal * cos_i;
    let tangent_norm = tangent.norm();
    let refracted = if tangent_norm == 0.0 {
        direction
    } else {
        tangent * (sin_t / tangent_norm) - normal * cos_t
    };
    debug_assert!(
        (n_from * sin_i - n_to * refracted.cross(normal).abs()).abs() <= 1e-12,
        "Snell residual {}",
        n_from * sin_i - n_to * refracted.cross(normal).abs()
    );
    let rs = ((n_from * cos_i - n_to * cos_t) / (n_from * cos_i + n_to * cos_t)).powi(2);
    let rp = ((n_from * cos_t - n_to * cos_i) / (n_from * cos_t + n_to * cos_i)).powi(2);
    Ok(Interaction {
        direction: refracted,
        kind: InteractionKind::Refracted,
        transmittance: 1.0 - 0.5 * (rs + rp),
        sin_incidence: sin_i,
        sin_refraction: sin_t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceId {
    Body(usize),
    Closure(usize),
    Entrance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceHit {
    pub t: f64,
    pub point: Vec2,
    /// Unit normal facing the incoming ray.
    pub normal: Vec2,
    pub surface: SurfaceId,
}

fn facing(normal: Vec2, direction: Vec2) -> Vec2 {
    if normal.dot(direction) > 0.0 {
        -normal
    } else {
        normal
    }
}

fn segment_hit(segment: &Segment, origin: Vec2, direction: Vec2, surface: SurfaceId) -> Option<SurfaceHit> {
    let t = segment.ray_hit(origin, direction, 0.0)?;
    let normal = (segment.b - segment.a).perp().normalized();
    Some(SurfaceHit {
        t,
        point: origin + direction * t,
        normal: facing(normal, direction),
        surface,
    })
}

/// Parametric interval of `p + t·d` inside `[lo, hi]` along one axis.
fn clip_axis(p: f64, d: f64, lo: f64, hi: f64, t0: &mut f64, t1: &mut f64) -> bool {
    if d == 0.0 {
        return p >= lo && p <= hi;
    }
    let (a, b) = ((lo - p) / d, (hi - p) / d);
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    *t0 = t0.max(a);
    *t1 = t1.min(b);
    *t0 <= *t1
}

/// Nearest crossing of the ray with the implicit oval cap of the entrance
/// face, found by scanning the residual for a sign change and bisecting to
/// [`INTERSECTION_TOLERANCE_MM`].
pub fn intersect_lens(origin: Vec2, direction: Vec2, face: &EntranceFace, spec: &LensSpec) -> Option<SurfaceHit> {
    let frame = &face.frame;
    let (pu, pw) = frame.to_local(origin);
    let (du, dw) = frame.vector_to_local(direction);
    let a = face.half_width_mm;
    let (mut t0, mut t1) = (0.0_f64, f64::INFINITY);
    if !clip_axis(pu, du, -a, a, &mut t0, &mut t1)
        || !clip_axis(pw, dw, -LENS_BOX_MARGIN_MM, face.rim_sag_mm + LENS_BOX_MARGIN_MM, &mut t0, &mut t1)
        || !t1.is_finite()
    {
        return None;
    }
    let g = |t: f64| oval_residual(pu + du * t, pw + dw * t, spec);

    let step = (t1 - t0) / LENS_SCAN_STEPS as f64;
    let mut lo = t0;
    let mut g_lo = g(lo);
    let mut bracket = None;
    for i in 1..=LENS_SCAN_STEPS {
        let hi = if i == LENS_SCAN_STEPS { t1 } else { t0 + step * i as f64 };
        let g_hi = g(hi);
        if g_hi == 0.0 {
            bracket = Some((hi, hi));
            break;
        }
        if g_lo != 0.0 && (g_lo < 0.0) != (g_hi < 0.0) {
            bracket = Some((lo, hi));
            break;
        }
        lo = hi;
        g_lo = g_hi;
    }
    let (mut lo, mut hi) = bracket?;
    let sign_lo = g(lo).signum();
    let mut t = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTION_ITERATIONS {
        t = 0.5 * (lo + hi);
        let v = g(t);
        if v.abs() <= INTERSECTION_TOLERANCE_MM || lo == hi {
            break;
        }
        if v.signum() == sign_lo {
            lo = t;
        } else {
            hi = t;
        }
    }
    if t <= 0.0 {
        return None;
    }
    let (u, w) = (pu + du * t, pw + dw * t);
    if u.abs() > a {
        return None;
    }
    let (gu, gw) = oval_gradient(u, w, spec);
    let normal = frame.vector_to_world(gu, gw).normalized();
    Some(SurfaceHit {
        t,
        point: origin + direction * t,
        normal: facing(normal, direction),
        surface: SurfaceId::Entrance,
    })
}

fn entrance_hit(origin: Vec2, direction: Vec2, face: &EntranceFace) -> Option<SurfaceHit> {
    match &face.kind {
        FaceKind::Lens { spec, .. } => intersect_lens(origin, direction, face, spec),
        FaceKind::Flat => {
            let [l, r] = face.rim();
            segment_hit(&Segment::new(l, r), origin, direction, SurfaceId::Entrance)
        }
    }
}

/// Closest surface of the scene along the ray.
pub fn nearest_hit(scene: &SensorGeometry, origin: Vec2, direction: Vec2) -> Option<SurfaceHit> {
    let closures = scene.closure_segments();
    scene
        .body
        .iter()
        .enumerate()
        .filter_map(|(i, e)| segment_hit(&e.segment, origin, direction, SurfaceId::Body(i)))
        .chain(
            closures
                .iter()
                .enumerate()
                .filter_map(|(i, s)| segment_hit(s, origin, direction, SurfaceId::Closure(i))),
        )
        .chain(entrance_hit(origin, direction, &scene.entrance))
        .min_by(|a, b| a.t.total_cmp(&b.t))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Terminal {
    Detected(Side),
    Escaped,
    /// Power fell below the floor.
    Absorbed,
    BounceLimit,
}

/// One refraction or reflection event, kept for physics checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceEvent {
    pub point: Vec2,
    /// Unit normal facing the incoming ray.
    pub normal: Vec2,
    pub surface: SurfaceId,
    pub n_from: f64,
    pub n_to: f64,
    pub interaction: Interaction,
}

impl SurfaceEvent {
    pub fn critical_sine(&self) -> f64 {
        self.n_to / self.n_from
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceOutcome {
    pub terminal: Terminal,
    pub initial_power: f64,
    /// Power delivered to a receiver.
    pub deposited_power: f64,
    pub escaped_power: f64,
    pub floor_power: f64,
    pub bulk_absorbed_power: f64,
    pub inflight_power: f64,
    pub path: Vec<Vec2>,
    /// Power carried into each path vertex.
    pub path_power: Vec<f64>,
    pub events: Vec<SurfaceEvent>,
}

/// Follows one ray through the scene.
pub fn trace(ray: Ray, scene: &SensorGeometry, limits: &TraceLimits) -> TraceOutcome {
    let mut out = TraceOutcome {
        terminal: Terminal::Escaped,
        initial_power: ray.power,
        deposited_power: 0.0,
        escaped_power: 0.0,
        floor_power: 0.0,
        bulk_absorbed_power: 0.0,
        inflight_power: 0.0,
        path: vec![ray.origin],
        path_power: vec![ray.power],
        events: Vec::new(),
    };
    let mut ray = ray;
    loop {
        if ray.power < limits.power_floor {
            out.floor_power += ray.power;
            out.terminal = Terminal::Absorbed;
            return out;
        }
        if ray.bounce_count >= limits.max_bounces {
            out.inflight_power += ray.power;
            out.terminal = Terminal::BounceLimit;
            return out;
        }
        let Some(hit) = nearest_hit(scene, ray.origin, ray.direction) else {
            out.path.push(ray.origin + ray.direction * 1.0);
            out.path_power.push(ray.power);
            out.escaped_power += ray.power;
            out.terminal = Terminal::Escaped;
            return out;
        };
        if ray.medium == Medium::Polymer && limits.bulk_absorption_per_mm > 0.0 {
            let kept = ray.power * (-limits.bulk_absorption_per_mm * hit.t).exp();
            out.bulk_absorbed_power += ray.power - kept;
            ray.power = kept;
        }
        out.path.push(hit.point);
        out.path_power.push(ray.power);

        let receiver = match hit.surface {
            SurfaceId::Body(i) => match scene.body[i].kind {
                EdgeKind::Receiver(side) => Some(side),
                EdgeKind::Wall => None,
            },
            _ => None,
        };
        if let Some(side) = receiver {
            if ray.medium == Medium::Polymer {
                out.deposited_power += ray.power;
                out.terminal = Terminal::Detected(side);
            } else {
                out.escaped_power += ray.power;
                out.terminal = Terminal::Escaped;
            }
            return out;
        }

        let (n_from, n_to, next_medium) = match ray.medium {
            Medium::Ambient => (scene.regions.ambient_index, scene.regions.polymer_index, Medium::Polymer),
            Medium::Polymer => (scene.regions.polymer_index, scene.regions.ambient_index, Medium::Ambient),
        };
        let interaction = match refract_or_reflect(ray.direction, hit.normal, n_from, n_to) {
            Ok(i) => i,
            Err(_) => {
                // Grazing contact; the ray slides past the surface.
                out.escaped_power += ray.power;
                out.terminal = Terminal::Escaped;
                return out;
            }
        };
        out.events.push(SurfaceEvent {
            point: hit.point,
            normal: hit.normal,
            surface: hit.surface,
            n_from,
            n_to,
            interaction,
        });
        ray.bounce_count += 1;
        match interaction.kind {
            InteractionKind::TotalInternalReflection => {}
            InteractionKind::Refracted => {
                if next_medium == Medium::Ambient {
                    // Leaving the polymer ends the ray.
                    out.escaped_power += ray.power;
                    out.terminal = Terminal::Escaped;
                    out.path.push(hit.point + interaction.direction * 1.0);
                    out.path_power.push(ray.power * interaction.transmittance);
                    return out;
                }
                let kept = ray.power * interaction.transmittance;
                out.escaped_power += ray.power - kept;
                ray.power = kept;
                ray.medium = next_medium;
            }
        }
        ray.direction = interaction.direction;
        ray.origin = hit.point + ray.direction * SURFACE_NUDGE_MM;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReceiverTally {
    pub ray_count: usize,
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DetectionTally {
    pub left: ReceiverTally,
    pub right: ReceiverTally,
    pub emitted_power: f64,
    pub escaped_power: f64,
    pub floor_power: f64,
    pub bulk_absorbed_power: f64,
    pub inflight_power: f64,
}

impl DetectionTally {
    pub fn receiver(&self, side: Side) -> &ReceiverTally {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }

    pub fn accounted_power(&self) -> f64 {
        self.left.power
            + self.right.power
            + self.escaped_power
            + self.floor_power
            + self.bulk_absorbed_power
            + self.inflight_power
    }

    pub fn conservation_error(&self) -> f64 {
        (self.accounted_power() - self.emitted_power).abs()
    }

    /// `(right − left)/(right + left)`; `None` when nothing is detected.
    pub fn differential(&self) -> Option<f64> {
        differential(self.left.power, self.right.power)
    }

    fn add(&mut self, o: &TraceOutcome) {
        self.emitted_power += o.initial_power;
        self.escaped_power += o.escaped_power;
        self.floor_power += o.floor_power;
        self.bulk_absorbed_power += o.bulk_absorbed_power;
        self.inflight_power += o.inflight_power;
        if let Terminal::Detected(side) = o.terminal {
            let r = match side {
                Side::Left => &mut self.left,
                Side::Right => &mut self.right,
            };
            r.ray_count += 1;
            r.power += o.deposited_power;
        }
    }
}

pub fn differential(left: f64, right: f64) -> Option<f64> {
    let total = left + right;
    (total > 0.0).then(|| (right - left) / total)
}

/// Traces every ray of the fan and returns the outcomes in ray order.
pub fn trace_fan(scene: &SensorGeometry, fan: &FanParams, limits: &TraceLimits, exec: Execution) -> Vec<TraceOutcome> {
    let rays = emit_fan(scene.emitter.position, scene.emitter.axis, fan);
    exec.map(&rays, |r| trace(*r, scene, limits))
}

/// Tally merged in ray-index order, so the result is independent of the
/// thread count.
pub fn run_fan(scene: &SensorGeometry, fan: &FanParams, limits: &TraceLimits, exec: Execution) -> Result<DetectionTally> {
    fan.validate()?;
    limits.validate()?;
    Ok(tally(&trace_fan(scene, fan, limits, exec)))
}

pub fn tally(outcomes: &[TraceOutcome]) -> DetectionTally {
    let mut t = DetectionTally::default();
    for o in outcomes {
        t.add(o);
    }
    debug_assert!(
        t.conservation_error() <= 1e-9 * t.emitted_power.max(1.0),
        "power not conserved: {:e}",
        t.conservation_error()
    );
    t
}

/// A fan ray just after refracting into the polymer through the entrance
/// face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EntryRay {
    pub point: Vec2,
    pub direction: Vec2,
}

impl EntryRay {
    /// Depth along the posed lens axis (from the apex) at which the line of
    /// this ray crosses the axis; `None` for rays parallel to it.
    pub fn axis_crossing_depth(&self, face: &EntranceFace) -> Option<f64> {
        let (pu, pw) = face.frame.to_local(self.point);
        let (du, dw) = face.frame.vector_to_local(self.direction);
        if du == 0.0 {
            return None;
        }
        Some(pw - pu * dw / du)
    }
}

/// Fan rays whose first contact is the entrance face and which refract into
/// the polymer there.
pub fn entry_rays(scene: &SensorGeometry, fan: &FanParams) -> Vec<EntryRay> {
    let (n1, n2) = (scene.regions.ambient_index, scene.regions.polymer_index);
    emit_fan(scene.emitter.position, scene.emitter.axis, fan)
        .into_iter()
        .filter_map(|ray| {
            let hit = nearest_hit(scene, ray.origin, ray.direction)?;
            if hit.surface != SurfaceId::Entrance {
                return None;
            }
            let i = refract_or_reflect(ray.direction, hit.normal, n1, n2).ok()?;
            (i.kind == InteractionKind::Refracted).then_some(EntryRay {
                point: hit.point,
                direction: i.direction,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocalSpot {
    /// Along the posed lens axis, measured from the apex (or flat face centre).
    pub depth_mm: f64,
    /// Largest transverse distance of a ray from the bundle centre at that depth.
    pub radius_mm: f64,
    pub center: Vec2,
    pub ray_count: usize,
}

/// Candidate depth range searched by [`focal_spot`], mm.
pub const FOCAL_SEARCH_DEPTH_MM: f64 = 100.0;

/// Finds the depth along the lens axis where the bundle of refracted entry
/// rays is narrowest. The half-width is convex in depth (maximum of affine
/// functions), so a coarse sweep followed by golden-section refinement finds
/// the global minimum on `[0, FOCAL_SEARCH_DEPTH_MM]`.
pub fn focal_spot(scene: &SensorGeometry, fan: &FanParams) -> Result<FocalSpot> {
    let entries = entry_rays(scene, fan);
    if entries.len() < 2 {
        return Err(DomainError::TooFewRays(entries.len()).into());
    }
    let frame = scene.entrance.frame;
    // Transverse position u(D) = alpha + beta·D of each ray line.
    let lines: Vec<(f64, f64)> = entries
        .iter()
        .filter_map(|e| {
            let (pu, pw) = frame.to_local(e.point);
            let (du, dw) = frame.vector_to_local(e.direction);
            (dw > 0.0).then(|| {
                let beta = du / dw;
                (pu - beta * pw, beta)
            })
        })
        .collect();
    if lines.len() < 2 {
        return Err(DomainError::TooFewRays(lines.len()).into());
    }
    let spread = |d: f64| {
        let (lo, hi) = lines.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(a, b)| {
            let u = a + b * d;
            (lo.min(u), hi.max(u))
        });
        (0.5 * (hi - lo), 0.5 * (hi + lo))
    };

    const SWEEP_STEPS: usize = 2000;
    let step = FOCAL_SEARCH_DEPTH_MM / SWEEP_STEPS as f64;
    let best = (0..=SWEEP_STEPS)
        .map(|i| i as f64 * step)
        .min_by(|&a, &b| spread(a).0.total_cmp(&spread(b).0))
        .unwrap_or(0.0);
    let (mut lo, mut hi) = ((best - step).max(0.0), (best + step).min(FOCAL_SEARCH_DEPTH_MM));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    while hi - lo > 1e-12 {
        let m1 = hi - ratio * (hi - lo);
        let m2 = lo + ratio * (hi - lo);
        if spread(m1).0 <= spread(m2).0 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let depth = 0.5 * (lo + hi);
    let (radius, center_u) = spread(depth);
    Ok(FocalSpot {
        depth_mm: depth,
        radius_mm: radius,
        center: frame.to_world(center_u, depth),
        ray_count: lines.len(),
    })
}
