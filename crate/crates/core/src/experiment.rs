//! Rotation sweeps, the simulated rotation-stage protocol and the
//! lens/no-lens comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::lensdesign::LensSpec;
use crate::raytrace::{differential, entry_rays, focal_spot, run_fan, DetectionTally, FanParams, FocalSpot, TraceLimits};
use crate::scene::{build_sensor, SensorGeometry, SensorParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub theta_deg: f64,
    pub left_power: f64,
    pub right_power: f64,
    pub left_count: usize,
    pub right_count: usize,
}

impl SweepRow {
    fn from_tally(theta_deg: f64, t: &DetectionTally) -> Self {
        Self {
            theta_deg,
            left_power: t.left.power,
            right_power: t.right.power,
            left_count: t.left.ray_count,
            right_count: t.right.ray_count,
        }
    }

    /// `(right − left)/(right + left)`.
    pub fn differential(&self) -> Option<f64> {
        differential(self.left_power, self.right_power)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn at(&self, theta_deg: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.theta_deg == theta_deg)
    }
}

fn validate_thetas(thetas: &[f64]) -> Result<()> {
    let mut problems = Vec::new();
    if thetas.is_empty() {
        problems.push("theta list is empty".to_string());
    }
    for t in thetas {
        if !(t.abs() <= 90.0) {
            problems.push(format!("theta {t}° exceeds ±90°"));
        }
    }
    if thetas.windows(2).any(|w| !(w[1] > w[0])) {
        problems.push("thetas must be strictly increasing".to_string());
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(problems))
    }
}

fn tally_at(
    scene: &SensorGeometry,
    theta_deg: f64,
    fan: &FanParams,
    limits: &TraceLimits,
) -> Result<DetectionTally> {
    let posed = scene.posed(theta_deg).map_err(|e| Error::AtTheta {
        theta_deg,
        source: Box::new(e),
    })?;
    // Rays inside one pose are traced sequentially; parallelism is across poses.
    run_fan(&posed, fan, limits, Execution::Sequential).map_err(|e| Error::AtTheta {
        theta_deg,
        source: Box::new(e),
    })
}

/// One fan per rotation angle; rows come back in `thetas` order.
pub fn rotation_sweep(
    scene: &SensorGeometry,
    thetas: &[f64],
    fan: &FanParams,
    limits: &TraceLimits,
    exec: Execution,
) -> Result<SweepResult> {
    validate_thetas(thetas)?;
    fan.validate()?;
    limits.validate()?;
    let rows = exec
        .map(thetas, |&theta| {
            tally_at(scene, theta, fan, limits).map(|t| SweepRow::from_tally(theta, &t))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { rows })
}

/// Focal spot of the refracted entry bundle at one pose, with the spread of
/// the individual axis crossings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FocusRow {
    pub theta_deg: f64,
    pub spot: FocalSpot,
    pub min_crossing_mm: f64,
    pub max_crossing_mm: f64,
}

pub fn focus_sweep(scene: &SensorGeometry, thetas: &[f64], fan: &FanParams, exec: Execution) -> Result<Vec<FocusRow>> {
    validate_thetas(thetas)?;
    fan.validate()?;
    exec.map(thetas, |&theta_deg| {
        let at = |e: Error| Error::AtTheta {
            theta_deg,
            source: Box::new(e),
        };
        let posed = scene.posed(theta_deg).map_err(at)?;
        let spot = focal_spot(&posed, fan).map_err(at)?;
        let (min_crossing_mm, max_crossing_mm) = entry_rays(&posed, fan)
            .iter()
            .filter_map(|e| e.axis_crossing_depth(&posed.entrance))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
        Ok(FocusRow {
            theta_deg,
            spot,
            min_crossing_mm,
            max_crossing_mm,
        })
    })
    .into_iter()
    .collect()
}

/// Affine photoreceiver model: more light, lower voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReadoutModel {
    pub v_max: f64,
    pub gain: f64,
}

impl Default for ReadoutModel {
    fn default() -> Self {
        Self { v_max: 3.3, gain: 3.0 }
    }
}

impl ReadoutModel {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.v_max > 0.0) {
            problems.push(format!("v_max {} must be positive", self.v_max));
        }
        if !(self.gain > 0.0) {
            problems.push(format!("gain {} must be positive", self.gain));
        }
        if !(self.v_max - self.gain >= 0.0) {
            problems.push(format!(
                "v_max − gain = {} would drive full power below 0 V",
                self.v_max - self.gain
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn voltage(&self, power: f64) -> f64 {
        self.v_max - self.gain * power
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FirstDirection {
    /// Right rotation (−θ) first.
    Negative,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProtocolParams {
    pub amplitude_deg: f64,
    pub speed_deg_s: f64,
    pub hold_s: f64,
    pub cycles: usize,
    pub sample_rate_hz: f64,
    pub first_direction: FirstDirection,
}

impl Default for ProtocolParams {
    /// ±3° at 15 deg/s with 0.8 s holds, six cycles, sampled at 100 Hz.
    fn default() -> Self {
        Self {
            amplitude_deg: 3.0,
            speed_deg_s: 15.0,
            hold_s: 0.8,
            cycles: 6,
            sample_rate_hz: 100.0,
            first_direction: FirstDirection::Negative,
        }
    }
}

/// Where in the cycle a sample falls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Ramp,
    Hold,
}

/// Sampled angles are snapped to this grid (degrees) so identical nominal
/// angles from different ramps land in the same fold bin.
const THETA_GRID: f64 = 1e-9;
const PHASE_EPS: f64 = 1e-9;

impl ProtocolParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if !(self.amplitude_deg > 0.0 && self.amplitude_deg <= 90.0) {
            problems.push(format!("amplitude {}° must lie in (0, 90]", self.amplitude_deg));
        }
        for (name, v) in [
            ("speed_deg_s", self.speed_deg_s),
            ("hold_s", self.hold_s),
            ("sample_rate_hz", self.sample_rate_hz),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                problems.push(format!("{name} = {v} must be positive"));
            }
        }
        if self.cycles < 1 {
            problems.push("cycles must be ≥ 1".to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    pub fn ramp_s(&self) -> f64 {
        self.amplitude_deg / self.speed_deg_s
    }

    /// Out, hold, back on one side then the same on the other.
    pub fn cycle_s(&self) -> f64 {
        4.0 * self.ramp_s() + 2.0 * self.hold_s
    }

    pub fn duration_s(&self) -> f64 {
        self.cycles as f64 * self.cycle_s()
    }

    /// Angle and phase at time `t_in` seconds into a cycle. Ramp intervals
    /// are closed at the amplitude end, so `±amplitude` belongs to the ramps.
    pub fn trajectory(&self, t_in: f64) -> (f64, Phase) {
        let ramp = self.ramp_s();
        let half = 2.0 * ramp + self.hold_s;
        let first = match self.first_direction {
            FirstDirection::Negative => -1.0,
            FirstDirection::Positive => 1.0,
        };
        let (sign, tau) = if t_in < half - PHASE_EPS {
            (first, t_in)
        } else {
            (-first, t_in - half)
        };
        let (magnitude, phase) = if tau <= ramp + PHASE_EPS {
            (self.speed_deg_s * tau, Phase::Ramp)
        } else if tau < ramp + self.hold_s - PHASE_EPS {
            (self.amplitude_deg, Phase::Hold)
        } else {
            (self.speed_deg_s * (half - tau), Phase::Ramp)
        };
        let magnitude = magnitude.clamp(0.0, self.amplitude_deg);
        let snapped = (magnitude / THETA_GRID).round() * THETA_GRID;
        let theta = if snapped == 0.0 { 0.0 } else { sign * snapped };
        (theta, phase)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolSample {
    pub time_s: f64,
    pub theta_deg: f64,
    pub left_voltage: f64,
    pub right_voltage: f64,
    pub cycle: usize,
    pub phase: Phase,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolTrace {
    pub samples: Vec<ProtocolSample>,
    pub cycle_count: usize,
}

/// Samples the trapezoidal rotation trajectory and converts the receiver
/// powers at each sample into voltages. Each distinct angle is traced once.
pub fn synthesize_protocol(
    scene: &SensorGeometry,
    readout: &ReadoutModel,
    protocol: &ProtocolParams,
    fan: &FanParams,
    limits: &TraceLimits,
    exec: Execution,
) -> Result<ProtocolTrace> {
    readout.validate()?;
    protocol.validate()?;
    fan.validate()?;
    limits.validate()?;

    let rate = protocol.sample_rate_hz;
    let cycle = protocol.cycle_s();
    let total = (protocol.duration_s() * rate).round() as usize;
    let per_cycle = cycle * rate;
    let per_cycle_int = per_cycle.round();
    let integral = (per_cycle - per_cycle_int).abs() < 1e-9 && per_cycle_int > 0.0;

    let timeline: Vec<(f64, usize, f64, Phase)> = (0..total)
        .map(|i| {
            let time = i as f64 / rate;
            let (cycle_index, t_in) = if integral {
                let n = per_cycle_int as usize;
                (i / n, (i % n) as f64 / rate)
            } else {
                let c = (time / cycle).floor();
                (c as usize, time - c * cycle)
            };
            let (theta, phase) = protocol.trajectory(t_in);
            (time, cycle_index.min(protocol.cycles - 1), theta, phase)
        })
        .collect();

    let mut unique: Vec<f64> = timeline.iter().map(|s| s.2).collect();
    unique.sort_by(f64::total_cmp);
    unique.dedup();
    let tallies = exec
        .map(&unique, |&theta| tally_at(scene, theta, fan, limits))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let by_theta: BTreeMap<u64, DetectionTally> = unique
        .iter()
        .zip(tallies)
        .map(|(t, tally)| (t.to_bits(), tally))
        .collect();

    let samples = timeline
        .into_iter()
        .map(|(time_s, cycle, theta_deg, phase)| {
            let t = &by_theta[&theta_deg.to_bits()];
            ProtocolSample {
                time_s,
                theta_deg,
                left_voltage: readout.voltage(t.left.power),
                right_voltage: readout.voltage(t.right.power),
                cycle,
                phase,
            }
        })
        .collect();
    Ok(ProtocolTrace {
        samples,
        cycle_count: protocol.cycles,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldedRow {
    pub theta_deg: f64,
    pub left_mean: f64,
    pub left_std: f64,
    pub right_mean: f64,
    pub right_std: f64,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldedCurves {
    pub rows: Vec<FoldedRow>,
    pub cycles_used: usize,
}

impl FoldedCurves {
    pub fn at(&self, theta_deg: f64) -> Option<&FoldedRow> {
        self.rows.iter().find(|r| r.theta_deg == theta_deg)
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    // A constant bin is reported exactly; summing then dividing would not.
    if values.iter().all(|v| *v == values[0]) {
        return (values[0], 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Drops the first `discard_cycles`, removes hold-phase samples and bins the
/// remainder by exact angle.
pub fn crop_and_fold(trace: &ProtocolTrace, discard_cycles: usize) -> Result<FoldedCurves> {
    if discard_cycles >= trace.cycle_count {
        return Err(Error::validation(format!(
            "cannot discard {discard_cycles} of {} cycles",
            trace.cycle_count
        )));
    }
    let mut bins: BTreeMap<OrderedTheta, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for s in &trace.samples {
        if s.cycle < discard_cycles || s.phase == Phase::Hold {
            continue;
        }
        let bin = bins.entry(OrderedTheta(s.theta_deg)).or_default();
        bin.0.push(s.left_voltage);
        bin.1.push(s.right_voltage);
    }
    if bins.is_empty() {
        return Err(Error::validation("no samples left after cropping"));
    }
    let rows = bins
        .into_iter()
        .map(|(theta, (left, right))| {
            let (left_mean, left_std) = mean_std(&left);
            let (right_mean, right_std) = mean_std(&right);
            FoldedRow {
                theta_deg: theta.0,
                left_mean,
                left_std,
                right_mean,
                right_std,
                sample_count: left.len(),
            }
        })
        .collect();
    Ok(FoldedCurves {
        rows,
        cycles_used: trace.cycle_count - discard_cycles,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedTheta(f64);

impl Eq for OrderedTheta {}

impl PartialOrd for OrderedTheta {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedTheta {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub theta_deg: f64,
    pub with_lens: Option<f64>,
    pub without_lens: Option<f64>,
}

impl ComparisonRow {
    /// `|D_with| / |D_without|`; infinite when the lens-free differential is
    /// exactly zero.
    pub fn magnitude_ratio(&self) -> Option<f64> {
        let (w, wo) = (self.with_lens?, self.without_lens?);
        Some(w.abs() / wo.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub with_lens: SweepResult,
    pub without_lens: SweepResult,
    pub rows: Vec<ComparisonRow>,
}

impl ComparisonReport {
    /// Smallest magnitude ratio over the extreme angles of the sweep.
    pub fn headline_ratio(&self) -> Option<f64> {
        let max = self.rows.iter().map(|r| r.theta_deg.abs()).fold(0.0, f64::max);
        if max == 0.0 {
            return None;
        }
        self.rows
            .iter()
            .filter(|r| r.theta_deg.abs() == max)
            .map(|r| r.magnitude_ratio())
            .collect::<Option<Vec<_>>>()?
            .into_iter()
            .reduce(f64::min)
    }
}

/// Runs the same sweep on the lensed sensor and on its flat-faced twin.
pub fn compare_with_without_lens(
    params: &SensorParams,
    lens: &LensSpec,
    thetas: &[f64],
    fan: &FanParams,
    limits: &TraceLimits,
    exec: Execution,
) -> Result<ComparisonReport> {
    let lensed = build_sensor(params, Some(lens), exec)?;
    let flat = build_sensor(params, None, exec)?;
    let with_lens = rotation_sweep(&lensed, thetas, fan, limits, exec)?;
    let without_lens = rotation_sweep(&flat, thetas, fan, limits, exec)?;
    let rows = with_lens
        .rows
        .iter()
        .zip(&without_lens.rows)
        .map(|(w, wo)| ComparisonRow {
            theta_deg: w.theta_deg,
            with_lens: w.differential(),
            without_lens: wo.differential(),
        })
        .collect();
    Ok(ComparisonReport {
        with_lens,
        without_lens,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_protocol_timing() {
        let p = ProtocolParams::default();
        assert!((p.cycle_s() - 2.4).abs() < 1e-12);
        assert!((p.duration_s() - 14.4).abs() < 1e-12);
        assert_eq!(p.trajectory(0.0), (0.0, Phase::Ramp));
        assert_eq!(p.trajectory(0.1).0, -1.5);
        assert_eq!(p.trajectory(0.2), (-3.0, Phase::Ramp));
        assert_eq!(p.trajectory(0.5), (-3.0, Phase::Hold));
        assert_eq!(p.trajectory(1.0), (-3.0, Phase::Ramp));
        assert_eq!(p.trajectory(1.1).0, -1.5);
        assert_eq!(p.trajectory(1.2).0, 0.0);
        assert_eq!(p.trajectory(1.4), (3.0, Phase::Ramp));
        assert_eq!(p.trajectory(1.9), (3.0, Phase::Hold));
    }

    #[test]
    fn readout_is_monotone() {
        let r = ReadoutModel::default();
        assert_eq!(r.voltage(0.0), 3.3);
        assert!(r.voltage(0.5) > r.voltage(0.6));
        assert!(ReadoutModel { v_max: 1.0, gain: 2.0 }.validate().is_err());
    }

    #[test]
    fn protocol_validation() {
        let bad = ProtocolParams {
            speed_deg_s: 0.0,
            cycles: 0,
            ..ProtocolParams::default()
        };
        match bad.validate() {
            Err(Error::Validation(p)) => assert_eq!(p.len(), 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn fold_rejects_everything_discarded() {
        let trace = ProtocolTrace {
            samples: vec![],
            cycle_count: 2,
        };
        assert!(crop_and_fold(&trace, 2).is_err());
        assert!(crop_and_fold(&trace, 1).is_err());
    }

    #[test]
    fn theta_validation() {
        assert!(validate_thetas(&[0.0, 0.0]).is_err());
        assert!(validate_thetas(&[3.0, -3.0]).is_err());
        assert!(validate_thetas(&[-91.0]).is_err());
        assert!(validate_thetas(&[-3.0, 0.0, 3.0]).is_ok());
    }
}
