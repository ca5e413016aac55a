//! Optical constants of a single printed layer and the photopolymer working
//! curve.
//!
//! The layer is treated as an incoherent, plane-parallel, partially absorbing
//! slab. From its net transmittance `T` and absorbance `A` the reflectance is
//! `R = 1 − T − A`; the single-interface reflectance `R_F` and the refractive
//! index `n` then follow in closed form.

use std::f64::consts::PI;

use log::warn;

use crate::error::{DomainError, Error, Result, RowError};

/// Largest `T + A − 1` excess absorbed as measurement noise.
pub const SIMPLEX_CLAMP_TOLERANCE: f64 = 1e-3;

/// Below this `|R − R_F|` the absorption term is taken as exactly zero.
pub const LOG_DEGENERACY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumSample {
    pub wavelength_nm: f64,
    pub transmittance: f64,
    pub absorbance: f64,
}

impl SpectrumSample {
    pub fn new(wavelength_nm: f64, transmittance: f64, absorbance: f64) -> Self {
        Self {
            wavelength_nm,
            transmittance,
            absorbance,
        }
    }
}

/// Net single-layer transmittance/absorbance record, ordered by wavelength.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    samples: Vec<SpectrumSample>,
}

impl Spectrum {
    /// Validates the samples. Rows whose `T + A` overshoots 1 by no more than
    /// [`SIMPLEX_CLAMP_TOLERANCE`] are rescaled onto `T + A = 1` with a
    /// warning; larger violations are errors.
    pub fn new(samples: Vec<SpectrumSample>) -> Result<Self> {
        let mut problems = Vec::new();
        if samples.is_empty() {
            problems.push("spectrum has no samples".to_string());
        }
        let mut out = Vec::with_capacity(samples.len());
        let mut prev = f64::NEG_INFINITY;
        for (i, s) in samples.into_iter().enumerate() {
            let row = i + 1;
            if !(s.wavelength_nm.is_finite() && s.wavelength_nm > 0.0) {
                problems.push(format!("row {row}: wavelength {} nm not positive", s.wavelength_nm));
            } else if s.wavelength_nm <= prev {
                problems.push(format!(
                    "row {row}: wavelength {} nm not strictly increasing",
                    s.wavelength_nm
                ));
            }
            prev = s.wavelength_nm;

            let mut t = s.transmittance;
            let mut a = s.absorbance;
            for (name, v) in [("T", &mut t), ("A", &mut a)] {
                if !v.is_finite() || *v < -SIMPLEX_CLAMP_TOLERANCE || *v > 1.0 + SIMPLEX_CLAMP_TOLERANCE {
                    problems.push(format!("row {row}: {name} = {v} outside [0, 1]"));
                } else if *v < 0.0 || *v > 1.0 {
                    warn!("row {row} ({} nm): clamping {name} = {v} into [0, 1]", s.wavelength_nm);
                    *v = v.clamp(0.0, 1.0);
                }
            }
            let excess = t + a - 1.0;
            if excess > SIMPLEX_CLAMP_TOLERANCE {
                problems.push(format!("row {row}: T + A = {} exceeds 1", t + a));
            } else if excess > 0.0 {
                warn!(
                    "row {row} ({} nm): T + A = {} rescaled onto the simplex",
                    s.wavelength_nm,
                    t + a
                );
                let sum = t + a;
                t /= sum;
                a = (1.0 - t).min(a / sum);
            }
            out.push(SpectrumSample::new(s.wavelength_nm, t, a));
        }
        if problems.is_empty() {
            Ok(Self { samples: out })
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn samples(&self) -> &[SpectrumSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// A measured layer: spectrum plus geometrical thickness.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabSample {
    pub spectrum: Spectrum,
    pub thickness_mm: f64,
}

impl SlabSample {
    pub fn new(spectrum: Spectrum, thickness_mm: f64) -> Result<Self> {
        if !(thickness_mm.is_finite() && thickness_mm > 0.0) {
            return Err(Error::validation(format!(
                "thickness {thickness_mm} mm must be positive"
            )));
        }
        Ok(Self {
            spectrum,
            thickness_mm,
        })
    }
}

fn check_fraction(name: &'static str, value: f64) -> Result<(), DomainError> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(DomainError::FractionOutOfRange { name, value })
    }
}

/// `R = 1 − T − A`.
pub fn reflectance_from_ta(transmittance: f64, absorbance: f64) -> Result<f64, DomainError> {
    check_fraction("T", transmittance)?;
    check_fraction("A", absorbance)?;
    let sum = transmittance + absorbance;
    if sum > 1.0 {
        return Err(DomainError::TransmittancePlusAbsorbance { sum });
    }
    Ok((1.0 - transmittance - absorbance).max(0.0))
}

/// Single-interface reflectance `R_F` recovered from the slab's total `R`
/// and `T`.
///
/// Evaluated as `2R / (b + √d)` with `b = 2 + T² − (1 − R)²` and
/// `d = b² − 4R(2 − R)`, which is the rationalised form of
/// `(b − √d) / (2(2 − R))` and avoids cancellation for small `R`.
pub fn interface_reflectance(reflectance: f64, transmittance: f64) -> Result<f64, DomainError> {
    check_fraction("R", reflectance)?;
    check_fraction("T", transmittance)?;
    if reflectance + transmittance > 1.0 + f64::EPSILON {
        return Err(DomainError::TransmittancePlusAbsorbance {
            sum: reflectance + transmittance,
        });
    }
    let r = reflectance;
    let t = transmittance;
    let b = 2.0 + t * t - (1.0 - r) * (1.0 - r);
    let discriminant = b * b - 4.0 * r * (2.0 - r);
    if discriminant < 0.0 {
        return Err(DomainError::NegativeDiscriminant { r, t, discriminant });
    }
    let denom = b + discriminant.sqrt();
    if denom <= 0.0 {
        return Err(DomainError::NegativeDiscriminant { r, t, discriminant });
    }
    Ok((2.0 * r / denom).min(r))
}

/// Refractive index of a partially absorbing slab of thickness `h` at
/// wavelength `λ`:
///
/// `n = (1 + R_F)/(1 − R_F) + sqrt(4R_F/(1 − R_F)² − (λ/(4πh))² ln²[R_F·T/(R − R_F)])`
///
/// `λ` is converted from nm to mm so both lengths share a unit.
pub fn refractive_index(
    reflectance: f64,
    transmittance: f64,
    thickness_mm: f64,
    wavelength_nm: f64,
) -> Result<f64, DomainError> {
    let r_f = interface_reflectance(reflectance, transmittance)?;
    refractive_index_with_rf(reflectance, transmittance, r_f, thickness_mm, wavelength_nm)
}

fn refractive_index_with_rf(
    r: f64,
    t: f64,
    r_f: f64,
    thickness_mm: f64,
    wavelength_nm: f64,
) -> Result<f64, DomainError> {
    if r_f >= 1.0 {
        return Err(DomainError::FractionOutOfRange {
            name: "R_F",
            value: r_f,
        });
    }
    let absorption = if (r - r_f).abs() < LOG_DEGENERACY_TOLERANCE {
        0.0
    } else {
        let arg = r_f * t / (r - r_f);
        if !(arg > 0.0 && arg.is_finite()) {
            return Err(DomainError::LogArgument { r, r_f, t });
        }
        let wavelength_mm = wavelength_nm * 1e-6;
        let k = wavelength_mm / (4.0 * PI * thickness_mm) * arg.ln();
        k * k
    };
    let one_minus = 1.0 - r_f;
    let radicand = 4.0 * r_f / (one_minus * one_minus) - absorption;
    if radicand < 0.0 {
        return Err(DomainError::NegativeRadicand { radicand });
    }
    Ok((1.0 + r_f) / one_minus + radicand.sqrt())
}

/// Transmittance and reflectance of an incoherent slab.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabResponse {
    pub transmittance: f64,
    pub reflectance: f64,
}

impl SlabResponse {
    pub fn absorbance(&self) -> f64 {
        (1.0 - self.transmittance - self.reflectance).max(0.0)
    }
}

/// Forward incoherent multiple-reflection model of a lossy slab with
/// interface reflectance `((n − 1)/(n + 1))²` and single-pass transmission
/// `τ = exp(−α·h)`. Used to generate synthetic spectra.
pub fn forward_slab_model(index: f64, absorption_per_mm: f64, thickness_mm: f64) -> SlabResponse {
    let r_f = ((index - 1.0) / (index + 1.0)).powi(2);
    let tau = (-absorption_per_mm * thickness_mm).exp();
    let denom = 1.0 - r_f * r_f * tau * tau;
    let one_minus = 1.0 - r_f;
    SlabResponse {
        transmittance: one_minus * one_minus * tau / denom,
        reflectance: r_f + r_f * tau * tau * one_minus * one_minus / denom,
    }
}

/// Absorption coefficient (1/mm) giving single-pass transmission `tau`
/// through `thickness_mm`.
pub fn absorption_for_tau(tau: f64, thickness_mm: f64) -> f64 {
    -tau.ln() / thickness_mm
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexEstimate {
    pub interface_reflectance: f64,
    pub index: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstantsRow {
    pub wavelength_nm: f64,
    pub reflectance: f64,
    /// `Err` marks a flagged row; it is kept in place, never dropped.
    pub estimate: Result<IndexEstimate, DomainError>,
}

/// Per-wavelength `R`, `R_F` and `n`, in the input's wavelength order.
#[derive(Debug, Clone, PartialEq)]
pub struct OpticalConstants {
    pub rows: Vec<ConstantsRow>,
}

impl OpticalConstants {
    pub fn flagged(&self) -> Vec<RowError> {
        self.rows
            .iter()
            .filter_map(|row| match &row.estimate {
                Ok(_) => None,
                Err(e) => Some(RowError {
                    wavelength_nm: row.wavelength_nm,
                    error: e.clone(),
                }),
            })
            .collect()
    }

    /// `Ok(self)` when no row is flagged.
    pub fn into_result(self) -> Result<Self> {
        let flagged = self.flagged();
        if flagged.is_empty() {
            Ok(self)
        } else {
            Err(Error::Rows(flagged))
        }
    }

    /// Piecewise-linear interpolation of `n`; no extrapolation.
    pub fn index_at_wavelength(&self, wavelength_nm: f64) -> Result<f64, DomainError> {
        let (first, last) = match (self.rows.first(), self.rows.last()) {
            (Some(f), Some(l)) => (f.wavelength_nm, l.wavelength_nm),
            _ => {
                return Err(DomainError::OutOfRange {
                    wavelength_nm,
                    min_nm: f64::NAN,
                    max_nm: f64::NAN,
                })
            }
        };
        if !(wavelength_nm >= first && wavelength_nm <= last) {
            return Err(DomainError::OutOfRange {
                wavelength_nm,
                min_nm: first,
                max_nm: last,
            });
        }
        let node_index = |row: &ConstantsRow| match &row.estimate {
            Ok(e) => Ok(e.index),
            Err(_) => Err(DomainError::FlaggedNode {
                wavelength_nm: row.wavelength_nm,
            }),
        };
        let hi = self
            .rows
            .partition_point(|row| row.wavelength_nm < wavelength_nm);
        let upper = &self.rows[hi];
        if upper.wavelength_nm == wavelength_nm {
            return node_index(upper);
        }
        let lower = &self.rows[hi - 1];
        let (n0, n1) = (node_index(lower)?, node_index(upper)?);
        let f = (wavelength_nm - lower.wavelength_nm) / (upper.wavelength_nm - lower.wavelength_nm);
        Ok(n0 + f * (n1 - n0))
    }
}

/// Applies `R = 1 − T − A`, the interface reflectance and the slab index per
/// wavelength. Failing rows are flagged in place.
pub fn compute_constants(sample: &SlabSample) -> OpticalConstants {
    let rows = sample
        .spectrum
        .samples()
        .iter()
        .map(|s| {
            let r = reflectance_from_ta(s.transmittance, s.absorbance);
            let reflectance = *r.as_ref().unwrap_or(&f64::NAN);
            let estimate = r.and_then(|r| {
                let r_f = interface_reflectance(r, s.transmittance)?;
                let index = refractive_index_with_rf(
                    r,
                    s.transmittance,
                    r_f,
                    sample.thickness_mm,
                    s.wavelength_nm,
                )?;
                Ok(IndexEstimate {
                    interface_reflectance: r_f,
                    index,
                })
            });
            ConstantsRow {
                wavelength_nm: s.wavelength_nm,
                reflectance,
                estimate,
            }
        })
        .collect();
    OpticalConstants { rows }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkingCurvePoint {
    pub energy_mj_cm2: f64,
    pub cure_depth_um: f64,
}

impl WorkingCurvePoint {
    pub fn new(energy_mj_cm2: f64, cure_depth_um: f64) -> Self {
        Self {
            energy_mj_cm2,
            cure_depth_um,
        }
    }
}

/// Jacobs working curve `Dc = Dp·ln(E/Ec)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkingCurveFit {
    pub penetration_um: f64,
    pub critical_energy_mj_cm2: f64,
    pub residual_rms_um: f64,
}

impl WorkingCurveFit {
    pub fn cure_depth_um(&self, energy_mj_cm2: f64) -> f64 {
        self.penetration_um * (energy_mj_cm2 / self.critical_energy_mj_cm2).ln()
    }
}

/// Ordinary least squares of `Dc` against `ln E`: the slope is `Dp` and the
/// intercept is `−Dp·ln Ec`.
pub fn fit_working_curve(points: &[WorkingCurvePoint]) -> Result<WorkingCurveFit> {
    let mut problems = Vec::new();
    if points.len() < 2 {
        problems.push(format!("need at least 2 points, got {}", points.len()));
    }
    for (i, p) in points.iter().enumerate() {
        if !(p.energy_mj_cm2.is_finite() && p.energy_mj_cm2 > 0.0) {
            problems.push(format!("point {}: energy {} must be positive", i + 1, p.energy_mj_cm2));
        }
        if !(p.cure_depth_um.is_finite() && p.cure_depth_um >= 0.0) {
            problems.push(format!("point {}: cure depth {} must be ≥ 0", i + 1, p.cure_depth_um));
        }
    }
    if !problems.is_empty() {
        return Err(Error::Validation(problems));
    }

    // Canonical order so the sums, and hence the fit, do not depend on input order.
    let mut sorted: Vec<(f64, f64)> = points
        .iter()
        .map(|p| (p.energy_mj_cm2.ln(), p.cure_depth_um))
        .collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let count = sorted.len() as f64;
    let mean_x = sorted.iter().map(|p| p.0).sum::<f64>() / count;
    let mean_y = sorted.iter().map(|p| p.1).sum::<f64>() / count;
    let (sxx, sxy) = sorted.iter().fold((0.0, 0.0), |(sxx, sxy), &(x, y)| {
        let dx = x - mean_x;
        (sxx + dx * dx, sxy + dx * (y - mean_y))
    });
    if sxx == 0.0 {
        return Err(DomainError::DegenerateFit("all energies are equal".into()).into());
    }
    let slope = sxy / sxx;
    if slope <= 0.0 {
        return Err(DomainError::NonPositivePenetration(slope).into());
    }
    let intercept = mean_y - slope * mean_x;
    let ss_res = sorted
        .iter()
        .map(|&(x, y)| (y - (intercept + slope * x)).powi(2))
        .sum::<f64>();
    Ok(WorkingCurveFit {
        penetration_um: slope,
        critical_energy_mj_cm2: (-intercept / slope).exp(),
        residual_rms_um: (ss_res / count).sqrt(),
    })
}
