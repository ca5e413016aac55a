//! Cartesian-oval lens synthesis.
//!
//! In lens-local coordinates the apex sits at the origin, the emitter at
//! `z = −s` in the ambient medium and the design focus at `z = s′` inside the
//! polymer. The refracting surface is the zero set of
//!
//! `f(x, z) = n1·√((z + s)² + x²) + n2·√(x² + (s′ − z)²) − (n1·s + n2·s′)`,
//!
//! i.e. every point on it has the same optical path from emitter to focus.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{DomainError, Error, Result};
use crate::exec::Execution;
use crate::io::{fmt_sig, read_text, write_text};

pub const SOLVE_TOLERANCE_MM: f64 = 1e-9;
pub const MAX_BISECTION_ITERATIONS: usize = 200;
/// Upper end of the root bracket as a fraction of `s′`.
pub const BRACKET_FRACTION: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LensSpec {
    /// Ambient index.
    pub n1: f64,
    /// Lens/material index.
    pub n2: f64,
    /// Emitter-to-apex distance, mm.
    pub s_mm: f64,
    /// Apex-to-focus distance, mm.
    pub s_prime_mm: f64,
    pub half_aperture_mm: f64,
    pub sample_count: usize,
}

impl Default for LensSpec {
    /// Design used for the 860 nm sensor: focus 20 mm inside the polymer,
    /// emitter 1 mm in front of the lens, 4 mm aperture.
    fn default() -> Self {
        Self {
            n1: 1.0,
            n2: 1.44,
            s_mm: 1.0,
            s_prime_mm: 20.0,
            half_aperture_mm: 2.0,
            sample_count: 2001,
        }
    }
}

impl LensSpec {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.n1 >= 1.0) {
            problems.push(format!("n1 = {} must be ≥ 1", self.n1));
        }
        if !(self.n2 > self.n1) {
            problems.push(format!("n2 = {} must exceed n1 = {}", self.n2, self.n1));
        }
        if !(self.s_mm > 0.0 && self.s_mm.is_finite()) {
            problems.push(format!("s = {} mm must be positive", self.s_mm));
        }
        if !(self.s_prime_mm > 0.0 && self.s_prime_mm.is_finite()) {
            problems.push(format!("s' = {} mm must be positive", self.s_prime_mm));
        }
        if !(self.half_aperture_mm > 0.0 && self.half_aperture_mm.is_finite()) {
            problems.push(format!(
                "half aperture = {} mm must be positive",
                self.half_aperture_mm
            ));
        }
        if self.sample_count < 3 || self.sample_count.is_multiple_of(2) {
            problems.push(format!(
                "sample count {} must be odd and ≥ 3",
                self.sample_count
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// `n1·s + n2·s′`, the optical path shared by every surface point.
    pub fn design_path_length(&self) -> f64 {
        self.n1 * self.s_mm + self.n2 * self.s_prime_mm
    }

    /// Sag `z` at lateral offset `x`, solved by bisection.
    pub fn sag_at(&self, x: f64) -> Result<f64, DomainError> {
        solve_sag(x, self)
    }
}

impl fmt::Display for LensSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n1={} n2={} s_mm={} s_prime_mm={} half_aperture_mm={} sample_count={}",
            self.n1, self.n2, self.s_mm, self.s_prime_mm, self.half_aperture_mm, self.sample_count
        )
    }
}

/// Positive when the optical path through `(x, z)` is longer than the design
/// path.
pub fn oval_residual(x: f64, z: f64, spec: &LensSpec) -> f64 {
    optical_path_length(x, z, spec) - spec.design_path_length()
}

/// Emitter → `(x, z)` → focus optical path.
pub fn optical_path_length(x: f64, z: f64, spec: &LensSpec) -> f64 {
    spec.n1 * (z + spec.s_mm).hypot(x) + spec.n2 * x.hypot(spec.s_prime_mm - z)
}

/// Gradient of [`oval_residual`] with respect to `(x, z)`.
pub fn oval_gradient(x: f64, z: f64, spec: &LensSpec) -> (f64, f64) {
    let d1 = (z + spec.s_mm).hypot(x);
    let d2 = x.hypot(spec.s_prime_mm - z);
    (
        spec.n1 * x / d1 + spec.n2 * x / d2,
        spec.n1 * (z + spec.s_mm) / d1 - spec.n2 * (spec.s_prime_mm - z) / d2,
    )
}

fn solve_sag(x: f64, spec: &LensSpec) -> Result<f64, DomainError> {
    let mut lo = 0.0;
    let mut hi = BRACKET_FRACTION * spec.s_prime_mm;
    let f_lo = oval_residual(x, lo, spec);
    if f_lo.abs() <= SOLVE_TOLERANCE_MM && x == 0.0 {
        return Ok(0.0);
    }
    let f_hi = oval_residual(x, hi, spec);
    if !(f_lo > 0.0 && f_hi < 0.0) {
        return Err(DomainError::BracketFailure {
            x,
            z_lo: lo,
            z_hi: hi,
            f_lo,
            f_hi,
        });
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..MAX_BISECTION_ITERATIONS {
        mid = 0.5 * (lo + hi);
        let f = oval_residual(x, mid, spec);
        if f.abs() <= SOLVE_TOLERANCE_MM {
            break;
        }
        if f > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(mid)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub x_mm: f64,
    pub z_mm: f64,
}

/// Sampled oval, `x` strictly increasing over the full aperture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LensProfile {
    pub spec: LensSpec,
    pub points: Vec<ProfilePoint>,
}

impl LensProfile {
    pub fn edge_sag_mm(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.z_mm)
    }

    pub fn apex(&self) -> ProfilePoint {
        self.points[self.points.len() / 2]
    }

    /// Largest `|OPL − (n1·s + n2·s′)|` over the samples.
    pub fn max_path_deviation(&self) -> f64 {
        let target = self.spec.design_path_length();
        self.points
            .iter()
            .map(|p| (optical_path_length(p.x_mm, p.z_mm, &self.spec) - target).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|z(x) − z(−x)|` over mirrored sample pairs.
    pub fn max_asymmetry(&self) -> f64 {
        let n = self.points.len();
        (0..n / 2)
            .map(|i| (self.points[i].z_mm - self.points[n - 1 - i].z_mm).abs())
            .fold(0.0, f64::max)
    }
}

/// Lateral sample `i` of `count` over `[−a, a]`. Built from the signed
/// offset to the centre so mirrored samples are exact negatives.
fn sample_x(i: usize, count: usize, half_aperture: f64) -> f64 {
    let m = (count - 1) / 2;
    half_aperture * (i as f64 - m as f64) / m as f64
}

/// Solves the non-negative half of the aperture and mirrors it.
pub fn solve_profile(spec: &LensSpec, exec: Execution) -> Result<LensProfile> {
    spec.validate()?;
    let m = (spec.sample_count - 1) / 2;
    let half: Vec<f64> = exec
        .map_range(m + 1, |k| {
            let x = sample_x(m + k, spec.sample_count, spec.half_aperture_mm);
            solve_sag(x, spec)
        })
        .into_iter()
        .collect::<Result<_, _>>()?;
    let points = (0..spec.sample_count)
        .map(|i| {
            let x = sample_x(i, spec.sample_count, spec.half_aperture_mm);
            let z = half[i.abs_diff(m)];
            ProfilePoint { x_mm: x, z_mm: z }
        })
        .collect();
    Ok(LensProfile {
        spec: *spec,
        points,
    })
}

/// Writes `x_mm,z_mm` rows at 9 significant digits under a `#` comment
/// header that records the spec.
pub fn export_profile(profile: &LensProfile, path: &Path) -> Result<()> {
    write_text(path, &profile_to_string(profile))
}

pub fn profile_to_string(profile: &LensProfile) -> String {
    let mut out = format!("# cartesian oval {}\nx_mm,z_mm\n", profile.spec);
    for p in &profile.points {
        out.push_str(&fmt_sig(p.x_mm));
        out.push(',');
        out.push_str(&fmt_sig(p.z_mm));
        out.push('\n');
    }
    out
}

pub fn import_profile(path: &Path) -> Result<LensProfile> {
    let text = read_text(path)?;
    parse_profile(&text).map_err(|msg| Error::parse(path, msg))
}

pub fn parse_profile(text: &str) -> std::result::Result<LensProfile, String> {
    let mut lines = text.lines();
    let header = lines.next().ok_or("empty profile file")?;
    let spec_text = header
        .strip_prefix("# cartesian oval ")
        .ok_or("missing '# cartesian oval' spec header")?;
    let mut spec = LensSpec::default();
    for token in spec_text.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| format!("malformed spec token '{token}'"))?;
        let num = |v: &str| v.parse::<f64>().map_err(|e| format!("{key}: {e}"));
        match key {
            "n1" => spec.n1 = num(value)?,
            "n2" => spec.n2 = num(value)?,
            "s_mm" => spec.s_mm = num(value)?,
            "s_prime_mm" => spec.s_prime_mm = num(value)?,
            "half_aperture_mm" => spec.half_aperture_mm = num(value)?,
            "sample_count" => {
                spec.sample_count = value.parse().map_err(|e| format!("{key}: {e}"))?
            }
            other => return Err(format!("unknown spec key '{other}'")),
        }
    }
    match lines.next() {
        Some("x_mm,z_mm") => {}
        other => return Err(format!("expected header 'x_mm,z_mm', found {other:?}")),
    }
    let mut points = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = i + 3;
        let (x, z) = line
            .split_once(',')
            .ok_or_else(|| format!("line {row}: expected two columns"))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| format!("line {row}: {e}"))
        };
        points.push(ProfilePoint {
            x_mm: parse(x)?,
            z_mm: parse(z)?,
        });
    }
    Ok(LensProfile { spec, points })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(n2: f64) -> LensSpec {
        LensSpec {
            n2,
            ..LensSpec::default()
        }
    }

    #[test]
    fn residual_examples() {
        let spec = design(1.44);
        assert_eq!(oval_residual(0.0, 0.0, &spec), 0.0);
        let at_focus = oval_residual(0.0, 20.0, &spec);
        assert!((at_focus - (1.0 - 1.44) * 20.0).abs() < 1e-12);
        // 40-digit evaluation: 1.379709766327953674...
        assert!((oval_residual(2.0, 0.0, &spec) - 1.379_709_766_327_953_7).abs() < 1e-12);
        assert!((optical_path_length(0.0, 0.0, &spec) - 29.8).abs() < 1e-12);
        assert!((optical_path_length(2.0, 0.0, &spec) - (29.8 + 1.379_709_766_327_953_7)).abs() < 1e-12);
    }

    #[test]
    fn edge_sag_golden_values() {
        // 300-step bisection at 40 digits on the same residual.
        let golden = [
            (1.44, 1.810_852_142_230_301_8),
            (1.49, 1.684_402_355_193_748_6),
            (1.54, 1.577_210_959_583_795_7),
        ];
        for (n2, z) in golden {
            let sag = design(n2).sag_at(2.0).unwrap();
            assert!((sag - z).abs() < 5e-9, "n2 = {n2}: {sag} vs {z}");
        }
    }

    #[test]
    fn profile_invariants() {
        let p = solve_profile(&design(1.44), Execution::Sequential).unwrap();
        assert_eq!(p.points.len(), 2001);
        assert_eq!(p.apex(), ProfilePoint { x_mm: 0.0, z_mm: 0.0 });
        assert_eq!(p.points[0].x_mm, -2.0);
        assert_eq!(p.points[2000].x_mm, 2.0);
        assert_eq!(p.max_asymmetry(), 0.0);
        assert!(p.max_path_deviation() <= 1e-9);
        for w in p.points.windows(2) {
            assert!(w[1].x_mm > w[0].x_mm);
        }
        for w in p.points[1000..].windows(2) {
            assert!(w[1].z_mm >= w[0].z_mm);
        }
    }

    #[test]
    fn higher_index_flattens_profile() {
        let profiles: Vec<_> = [1.44, 1.49, 1.54]
            .iter()
            .map(|&n2| solve_profile(&design(n2), Execution::Sequential).unwrap())
            .collect();
        for pair in profiles.windows(2) {
            for (a, b) in pair[0].points.iter().zip(&pair[1].points) {
                if a.x_mm != 0.0 {
                    assert!(b.z_mm < a.z_mm, "x = {}", a.x_mm);
                }
            }
        }
    }

    #[test]
    fn refinement_is_stable() {
        let coarse = solve_profile(&LensSpec { sample_count: 11, ..design(1.44) }, Execution::Sequential).unwrap();
        let fine = solve_profile(&LensSpec { sample_count: 21, ..design(1.44) }, Execution::Sequential).unwrap();
        for (i, p) in coarse.points.iter().enumerate() {
            let q = fine.points[2 * i];
            assert_eq!(p.x_mm, q.x_mm);
            assert!((p.z_mm - q.z_mm).abs() <= SOLVE_TOLERANCE_MM);
        }
    }

    #[test]
    fn validation_and_bracket_failure() {
        assert!(matches!(
            solve_profile(&LensSpec { sample_count: 2, ..design(1.44) }, Execution::Sequential),
            Err(Error::Validation(_))
        ));
        assert!(LensSpec { n2: 1.0, ..design(1.44) }.validate().is_err());
        let wide = LensSpec {
            half_aperture_mm: 40.0,
            sample_count: 5,
            ..design(1.44)
        };
        match solve_profile(&wide, Execution::Sequential) {
            Err(Error::Domain(DomainError::BracketFailure { x, .. })) => assert!(x.abs() > 2.0),
            other => panic!("expected bracket failure, got {other:?}"),
        }
    }

    #[test]
    fn text_round_trip() {
        let p = solve_profile(&LensSpec { sample_count: 3, ..design(1.44) }, Execution::Sequential).unwrap();
        let text = profile_to_string(&p);
        assert_eq!(text.lines().count(), 2 + 3);
        let back = parse_profile(&text).unwrap();
        assert_eq!(back.spec, p.spec);
        assert_eq!(profile_to_string(&back), text);
        assert!(parse_profile("x_mm,z_mm\n").is_err());
    }
}
