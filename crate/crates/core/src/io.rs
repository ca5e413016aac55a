//! Text file formats: spectra, working-curve points and optical constants.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::material::{OpticalConstants, Spectrum, SpectrumSample, WorkingCurveFit, WorkingCurvePoint};

pub const SPECTRUM_HEADER: &str = "wavelength_nm,T,A";
pub const WORKING_CURVE_HEADER: &str = "energy_mJ_cm2,cure_depth_um";
pub const CONSTANTS_HEADER: &str = "wavelength_nm,R,R_F,n";

/// Rounds to 9 significant digits and prints the shortest decimal that reads
/// back to the rounded value; magnitudes below 1e−4 or from 1e15 up use
/// exponent notation.
pub fn fmt_sig(value: f64) -> String {
    if !value.is_finite() {
        return "NaN".to_string();
    }
    let rounded: f64 = format!("{value:.8e}").parse().unwrap_or(value);
    // Normalise negative zero.
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    let magnitude = rounded.abs();
    if magnitude != 0.0 && !(1e-4..1e15).contains(&magnitude) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Parses a headered numeric CSV, returning rows of exactly `columns`
/// values. Errors carry 1-based line numbers.
fn parse_numeric_csv(text: &str, header: &str) -> std::result::Result<Vec<Vec<f64>>, String> {
    let columns = header.split(',').count();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| format!("cannot read header: {e}"))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if found != header {
        return Err(format!("expected header '{header}', found '{found}'"));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| e.to_string())?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != columns {
            return Err(format!(
                "line {line}: expected {columns} columns, found {}",
                record.len()
            ));
        }
        let values = record
            .iter()
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|e| format!("line {line}: '{v}': {e}"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        rows.push(values);
    }
    Ok(rows)
}

pub fn parse_spectrum(text: &str) -> std::result::Result<Vec<SpectrumSample>, String> {
    Ok(parse_numeric_csv(text, SPECTRUM_HEADER)?
        .into_iter()
        .map(|r| SpectrumSample::new(r[0], r[1], r[2]))
        .collect())
}

pub fn read_spectrum(path: &Path) -> Result<Spectrum> {
    let samples = parse_spectrum(&read_text(path)?).map_err(|m| Error::parse(path, m))?;
    Spectrum::new(samples)
}

pub fn parse_working_curve(text: &str) -> std::result::Result<Vec<WorkingCurvePoint>, String> {
    Ok(parse_numeric_csv(text, WORKING_CURVE_HEADER)?
        .into_iter()
        .map(|r| WorkingCurvePoint::new(r[0], r[1]))
        .collect())
}

pub fn read_working_curve(path: &Path) -> Result<Vec<WorkingCurvePoint>> {
    parse_working_curve(&read_text(path)?).map_err(|m| Error::parse(path, m))
}

/// Flagged rows are written with `NaN` in the columns they could not fill.
pub fn constants_to_string(constants: &OpticalConstants) -> String {
    let mut out = String::from(CONSTANTS_HEADER);
    out.push('\n');
    for row in &constants.rows {
        let (r_f, n) = match &row.estimate {
            Ok(e) => (e.interface_reflectance, e.index),
            Err(_) => (f64::NAN, f64::NAN),
        };
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_sig(row.wavelength_nm),
            fmt_sig(row.reflectance),
            fmt_sig(r_f),
            fmt_sig(n)
        ));
    }
    out
}

pub fn parse_constants(text: &str) -> std::result::Result<Vec<[f64; 4]>, String> {
    Ok(parse_numeric_csv(text, CONSTANTS_HEADER)?
        .into_iter()
        .map(|r| [r[0], r[1], r[2], r[3]])
        .collect())
}

pub fn working_curve_fit_to_string(fit: &WorkingCurveFit) -> String {
    format!(
        "Dp_um,Ec_mJ_cm2,residual_rms_um\n{},{},{}\n",
        fmt_sig(fit.penetration_um),
        fmt_sig(fit.critical_energy_mj_cm2),
        fmt_sig(fit.residual_rms_um)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(1.5), "1.5");
        assert_eq!(fmt_sig(1.0 / 3.0), "0.333333333");
        assert_eq!(fmt_sig(29.8 + 1e-12), "29.8");
        assert_eq!(fmt_sig(-0.0), "0");
        assert_eq!(fmt_sig(f64::NAN), "NaN");
        assert_eq!(fmt_sig(123456789012.0), "123456789000");
        assert_eq!(fmt_sig(1.0802965696939507e-16), "1.08029657e-16");
        assert_eq!(fmt_sig(-2.5e15), "-2.5e15");
        assert_eq!(fmt_sig(0.0001), "0.0001");
    }

    #[test]
    fn spectrum_parsing() {
        let rows = parse_spectrum("wavelength_nm,T,A\n450,0.9,0.01\n500, 0.91 ,0.005\n").unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[1].transmittance, 0.91);
        let err = parse_spectrum("lambda,T,A\n450,0.9,0.01\n").unwrap_err();
        assert!(err.contains("wavelength_nm,T,A"), "{err}");
        let err = parse_spectrum("wavelength_nm,T,A\n450,x,0.01\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn working_curve_parsing() {
        let pts = parse_working_curve("energy_mJ_cm2,cure_depth_um\n10,138.6\n").unwrap();
        assert_eq!(pts, vec![WorkingCurvePoint::new(10.0, 138.6)]);
    }
}
