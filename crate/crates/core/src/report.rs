//! CSV and SVG artifacts for sweeps, protocol traces and comparisons.
//!
//! Numbers go through [`fmt_sig`], so files are byte-stable for identical
//! inputs regardless of how the results were computed.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{ComparisonReport, FocusRow, FoldedCurves, ProtocolTrace, SweepResult};
use crate::io::{fmt_sig, write_text};
use crate::raytrace::{DetectionTally, TraceOutcome};
use crate::svg::{LinePlot, Series};

pub const SWEEP_HEADER: &str = "theta_deg,left_power,right_power,left_count,right_count";
pub const PROTOCOL_HEADER: &str = "time_s,theta_deg,left_voltage_V,right_voltage_V";
pub const FOLDED_HEADER: &str = "theta_deg,left_mean_V,left_std_V,right_mean_V,right_std_V";
pub const TALLY_HEADER: &str = "receiver,ray_count,power";
pub const PATH_HEADER: &str = "ray_id,vertex_index,x_mm,y_mm,power";
pub const FOCUS_HEADER: &str =
    "theta_deg,depth_mm,radius_mm,center_x_mm,center_y_mm,ray_count,min_crossing_mm,max_crossing_mm";
pub const COMPARISON_HEADER: &str = "theta_deg,D_with_lens,D_without_lens,magnitude_ratio";

const LEFT_COLOR: &str = "#1f77b4";
const RIGHT_COLOR: &str = "#d62728";

fn refuse_empty(len: usize, what: &str) -> Result<()> {
    if len == 0 {
        Err(Error::validation(format!("refusing to write an empty {what}")))
    } else {
        Ok(())
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".to_string(), fmt_sig)
}

fn csv(header: &str, rows: impl Iterator<Item = String>) -> String {
    let mut out = String::from(header);
    out.push('\n');
    for r in rows {
        out.push_str(&r);
        out.push('\n');
    }
    out
}

pub fn sweep_csv(sweep: &SweepResult) -> Result<String> {
    refuse_empty(sweep.rows.len(), "sweep")?;
    Ok(csv(
        SWEEP_HEADER,
        sweep.rows.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                fmt_sig(r.theta_deg),
                fmt_sig(r.left_power),
                fmt_sig(r.right_power),
                r.left_count,
                r.right_count
            )
        }),
    ))
}

pub fn protocol_csv(trace: &ProtocolTrace) -> Result<String> {
    refuse_empty(trace.samples.len(), "protocol trace")?;
    Ok(csv(
        PROTOCOL_HEADER,
        trace.samples.iter().map(|s| {
            format!(
                "{},{},{},{}",
                fmt_sig(s.time_s),
                fmt_sig(s.theta_deg),
                fmt_sig(s.left_voltage),
                fmt_sig(s.right_voltage)
            )
        }),
    ))
}

pub fn folded_csv(folded: &FoldedCurves) -> Result<String> {
    refuse_empty(folded.rows.len(), "folded curve set")?;
    Ok(csv(
        FOLDED_HEADER,
        folded.rows.iter().map(|r| {
            format!(
                "{},{},{},{},{}",
                fmt_sig(r.theta_deg),
                fmt_sig(r.left_mean),
                fmt_sig(r.left_std),
                fmt_sig(r.right_mean),
                fmt_sig(r.right_std)
            )
        }),
    ))
}

pub fn tally_csv(tally: &DetectionTally) -> String {
    csv(
        TALLY_HEADER,
        [("left", &tally.left), ("right", &tally.right)]
            .into_iter()
            .map(|(name, r)| format!("{name},{},{}", r.ray_count, fmt_sig(r.power))),
    )
}

pub fn path_csv(outcomes: &[TraceOutcome]) -> Result<String> {
    refuse_empty(outcomes.len(), "path dump")?;
    Ok(csv(
        PATH_HEADER,
        outcomes.iter().enumerate().flat_map(|(id, o)| {
            o.path.iter().zip(&o.path_power).enumerate().map(move |(k, (p, w))| {
                format!("{id},{k},{},{},{}", fmt_sig(p.x), fmt_sig(p.y), fmt_sig(*w))
            })
        }),
    ))
}

pub fn comparison_csv(report: &ComparisonReport) -> Result<String> {
    refuse_empty(report.rows.len(), "comparison")?;
    Ok(csv(
        COMPARISON_HEADER,
        report.rows.iter().map(|r| {
            format!(
                "{},{},{},{}",
                fmt_sig(r.theta_deg),
                opt(r.with_lens),
                opt(r.without_lens),
                opt(r.magnitude_ratio())
            )
        }),
    ))
}

pub fn focus_csv(rows: &[FocusRow]) -> Result<String> {
    refuse_empty(rows.len(), "focus table")?;
    Ok(csv(
        FOCUS_HEADER,
        rows.iter().map(|r| {
            format!(
                "{},{},{},{},{},{},{},{}",
                fmt_sig(r.theta_deg),
                fmt_sig(r.spot.depth_mm),
                fmt_sig(r.spot.radius_mm),
                fmt_sig(r.spot.center.x),
                fmt_sig(r.spot.center.y),
                r.spot.ray_count,
                fmt_sig(r.min_crossing_mm),
                fmt_sig(r.max_crossing_mm)
            )
        }),
    ))
}

pub fn sweep_svg(sweep: &SweepResult, title: &str) -> Result<String> {
    refuse_empty(sweep.rows.len(), "sweep")?;
    let series = |name: &str, color, f: fn(&crate::experiment::SweepRow) -> f64| Series {
        name: name.to_string(),
        color,
        points: sweep.rows.iter().map(|r| (r.theta_deg, f(r))).collect(),
        band: None,
    };
    Ok(LinePlot {
        title: title.to_string(),
        x_label: "rotation angle (deg)".into(),
        y_label: "detected power (fraction of emitted)".into(),
        series: vec![
            series("left receiver", LEFT_COLOR, |r| r.left_power),
            series("right receiver", RIGHT_COLOR, |r| r.right_power),
        ],
    }
    .render())
}

pub fn folded_svg(folded: &FoldedCurves) -> Result<String> {
    refuse_empty(folded.rows.len(), "folded curve set")?;
    let series = |name: &str, color, mean: fn(&crate::experiment::FoldedRow) -> (f64, f64)| Series {
        name: name.to_string(),
        color,
        points: folded.rows.iter().map(|r| (r.theta_deg, mean(r).0)).collect(),
        band: Some(
            folded
                .rows
                .iter()
                .map(|r| {
                    let (m, s) = mean(r);
                    (r.theta_deg, m - s, m + s)
                })
                .collect(),
        ),
    };
    Ok(LinePlot {
        title: format!("voltage vs angle, mean ± σ over {} cycles", folded.cycles_used),
        x_label: "rotation angle (deg)".into(),
        y_label: "voltage (V)".into(),
        series: vec![
            series("left receiver", LEFT_COLOR, |r| (r.left_mean, r.left_std)),
            series("right receiver", RIGHT_COLOR, |r| (r.right_mean, r.right_std)),
        ],
    }
    .render())
}

pub fn protocol_svg(trace: &ProtocolTrace) -> Result<String> {
    refuse_empty(trace.samples.len(), "protocol trace")?;
    let series = |name: &str, color, f: fn(&crate::experiment::ProtocolSample) -> f64| Series {
        name: name.to_string(),
        color,
        points: trace.samples.iter().map(|s| (s.time_s, f(s))).collect(),
        band: None,
    };
    Ok(LinePlot {
        title: "receiver voltages during the rotation protocol".into(),
        x_label: "time (s)".into(),
        y_label: "voltage (V)".into(),
        series: vec![
            series("left receiver", LEFT_COLOR, |s| s.left_voltage),
            series("right receiver", RIGHT_COLOR, |s| s.right_voltage),
        ],
    }
    .render())
}

pub fn comparison_svg(report: &ComparisonReport) -> Result<String> {
    refuse_empty(report.rows.len(), "comparison")?;
    let series = |name: &str, color, f: fn(&crate::experiment::ComparisonRow) -> Option<f64>| Series {
        name: name.to_string(),
        color,
        points: report
            .rows
            .iter()
            .filter_map(|r| f(r).map(|d| (r.theta_deg, d)))
            .collect(),
        band: None,
    };
    Ok(LinePlot {
        title: "differential (R − L)/(R + L)".into(),
        x_label: "rotation angle (deg)".into(),
        y_label: "differential".into(),
        series: vec![
            series("with lens", RIGHT_COLOR, |r| r.with_lens),
            series("flat face", LEFT_COLOR, |r| r.without_lens),
        ],
    }
    .render())
}

/// Writes `contents` to `dir/name`, returning the full path.
pub fn emit(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    write_text(&path, contents)?;
    Ok(path)
}
