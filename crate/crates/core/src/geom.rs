//! Planar geometry kernel: vectors, rigid rotations, segments and closed
//! polylines. All lengths are in millimetres.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        Vec2::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Unit vector at `angle` radians counter-clockwise from +x.
    pub fn from_angle(angle: f64) -> Vec2 {
        let (s, c) = angle.sin_cos();
        Vec2::new(c, s)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn mirror_x(self) -> Vec2 {
        Vec2::new(-self.x, self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Rigid rotation about a pivot. Angle stored as its sine and cosine so the
/// identity rotation is exact.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation {
    pub pivot: Vec2,
    sin: f64,
    cos: f64,
}

impl Rotation {
    pub fn new(angle_rad: f64, pivot: Vec2) -> Self {
        let (sin, cos) = angle_rad.sin_cos();
        Self { pivot, sin, cos }
    }

    pub fn from_degrees(angle_deg: f64, pivot: Vec2) -> Self {
        Self::new(angle_deg.to_radians(), pivot)
    }

    pub fn identity() -> Self {
        Self {
            pivot: Vec2::default(),
            sin: 0.0,
            cos: 1.0,
        }
    }

    pub fn is_identity(&self) -> bool {
        self.sin == 0.0 && self.cos == 1.0
    }

    pub fn rotate_vector(&self, v: Vec2) -> Vec2 {
        if self.is_identity() {
            return v;
        }
        Vec2::new(
            self.cos * v.x - self.sin * v.y,
            self.sin * v.x + self.cos * v.y,
        )
    }

    pub fn apply(&self, p: Vec2) -> Vec2 {
        if self.is_identity() {
            return p;
        }
        self.pivot + self.rotate_vector(p - self.pivot)
    }

    pub fn inverse_vector(&self, v: Vec2) -> Vec2 {
        if self.is_identity() {
            return v;
        }
        Vec2::new(
            self.cos * v.x + self.sin * v.y,
            -self.sin * v.x + self.cos * v.y,
        )
    }

    pub fn inverse_apply(&self, p: Vec2) -> Vec2 {
        if self.is_identity() {
            return p;
        }
        self.pivot + self.inverse_vector(p - self.pivot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub a: Vec2,
    pub b: Vec2,
}

impl Segment {
    pub const fn new(a: Vec2, b: Vec2) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        self.a.distance(self.b)
    }

    pub fn midpoint(&self) -> Vec2 {
        (self.a + self.b) * 0.5
    }

    /// Parameter `t > t_min` at which the ray `origin + t·dir` crosses this
    /// segment, or `None` for parallel rays and misses.
    pub fn ray_hit(&self, origin: Vec2, dir: Vec2, t_min: f64) -> Option<f64> {
        let e = self.b - self.a;
        let denom = dir.cross(e);
        if denom == 0.0 {
            return None;
        }
        let w = self.a - origin;
        let t = w.cross(e) / denom;
        let u = w.cross(dir) / denom;
        if t > t_min && (0.0..=1.0).contains(&u) {
            Some(t)
        } else {
            None
        }
    }

    /// Distance from `p` to the closest point of the segment.
    pub fn distance_to(&self, p: Vec2) -> f64 {
        let e = self.b - self.a;
        let len2 = e.dot(e);
        let t = if len2 == 0.0 {
            0.0
        } else {
            ((p - self.a).dot(e) / len2).clamp(0.0, 1.0)
        };
        (self.a + e * t).distance(p)
    }
}

/// Proper or touching intersection test between two closed segments.
pub fn segments_intersect(s: &Segment, t: &Segment) -> bool {
    fn orient(a: Vec2, b: Vec2, c: Vec2) -> f64 {
        (b - a).cross(c - a)
    }
    fn on_segment(a: Vec2, b: Vec2, p: Vec2) -> bool {
        p.x >= a.x.min(b.x) && p.x <= a.x.max(b.x) && p.y >= a.y.min(b.y) && p.y <= a.y.max(b.y)
    }
    let d1 = orient(t.a, t.b, s.a);
    let d2 = orient(t.a, t.b, s.b);
    let d3 = orient(s.a, s.b, t.a);
    let d4 = orient(s.a, s.b, t.b);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(t.a, t.b, s.a))
        || (d2 == 0.0 && on_segment(t.a, t.b, s.b))
        || (d3 == 0.0 && on_segment(s.a, s.b, t.a))
        || (d4 == 0.0 && on_segment(s.a, s.b, t.b))
}

/// Closed polyline; the last vertex connects back to the first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polygon {
    pub vertices: Vec<Vec2>,
}

impl Polygon {
    pub fn new(vertices: Vec<Vec2>) -> Self {
        Self { vertices }
    }

    pub fn edges(&self) -> impl Iterator<Item = Segment> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| Segment::new(self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn signed_area(&self) -> f64 {
        self.edges().map(|e| e.a.cross(e.b)).sum::<f64>() * 0.5
    }

    /// Winding number of the boundary around `p` (non-zero means inside).
    pub fn winding_number(&self, p: Vec2) -> i32 {
        let mut wn = 0;
        for e in self.edges() {
            let side = (e.b - e.a).cross(p - e.a);
            if e.a.y <= p.y {
                if e.b.y > p.y && side > 0.0 {
                    wn += 1;
                }
            } else if e.b.y <= p.y && side < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    pub fn contains(&self, p: Vec2) -> bool {
        self.winding_number(p) != 0
    }

    /// Simple-polygon check: no two non-adjacent edges touch and no edge is
    /// degenerate. Quadratic, intended for construction-time validation.
    pub fn is_simple(&self) -> bool {
        let edges: Vec<Segment> = self.edges().collect();
        let n = edges.len();
        if n < 3 {
            return false;
        }
        if edges.iter().any(|e| e.length() == 0.0) {
            return false;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                if adjacent {
                    continue;
                }
                if segments_intersect(&edges[i], &edges[j]) {
                    return false;
                }
            }
        }
        true
    }

    pub fn bounding_box(&self) -> (Vec2, Vec2) {
        let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = Vec2::new(lo.x.min(v.x), lo.y.min(v.y));
            hi = Vec2::new(hi.x.max(v.x), hi.y.max(v.y));
        }
        (lo, hi)
    }
}
