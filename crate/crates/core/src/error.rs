use std::path::PathBuf;

use thiserror::Error;

/// Failures of the optical relations themselves: non-physical inputs or
/// results outside the model's domain.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("inconsistent sample: T + A = {sum} exceeds 1")]
    TransmittancePlusAbsorbance { sum: f64 },
    #[error("value {name} = {value} outside [0, 1]")]
    FractionOutOfRange { name: &'static str, value: f64 },
    #[error("non-physical (R, T) = ({r}, {t}): interface-reflectance discriminant {discriminant} < 0")]
    NegativeDiscriminant { r: f64, t: f64, discriminant: f64 },
    #[error("log argument R_F·T/(R − R_F) not positive (R = {r}, R_F = {r_f}, T = {t})")]
    LogArgument { r: f64, r_f: f64, t: f64 },
    #[error("absorption term dominates: radicand {radicand} < 0 (check thickness and wavelength)")]
    NegativeRadicand { radicand: f64 },
    #[error("wavelength {wavelength_nm} nm outside table range [{min_nm}, {max_nm}] nm")]
    OutOfRange { wavelength_nm: f64, min_nm: f64, max_nm: f64 },
    #[error("interpolation node at {wavelength_nm} nm is flagged")]
    FlaggedNode { wavelength_nm: f64 },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("fitted penetration depth Dp = {0} µm is not positive")]
    NonPositivePenetration(f64),
    #[error("root bracket failed at x = {x} mm: residual({x}, {z_lo}) = {f_lo}, residual({x}, {z_hi}) = {f_hi}")]
    BracketFailure {
        x: f64,
        z_lo: f64,
        z_hi: f64,
        f_lo: f64,
        f_hi: f64,
    },
    #[error("degenerate normal: direction·normal = {0} must be negative")]
    DegenerateNormal(f64),
    #[error("fewer than 2 rays enter the polymer ({0})")]
    TooFewRays(usize),
}

/// One failed row of a per-wavelength computation.
#[derive(Debug, Clone, PartialEq)]
pub struct RowError {
    pub wavelength_nm: f64,
    pub error: DomainError,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation failed: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("{} row(s) failed: {}", .0.len(), format_rows(.0))]
    Rows(Vec<RowError>),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("at theta = {theta_deg}°: {source}")]
    AtTheta {
        theta_deg: f64,
        #[source]
        source: Box<Error>,
    },
}

fn format_rows(rows: &[RowError]) -> String {
    rows.iter()
        .map(|r| format!("{} nm: {}", r.wavelength_nm, r.error))
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(vec![msg.into()])
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn parse(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Stable process exit code: 1 validation, 2 I/O, 3 numerical/domain.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Validation(_) | Error::Parse { .. } => 1,
            Error::Io { .. } => 2,
            Error::Domain(_) | Error::Rows(_) => 3,
            Error::AtTheta { source, .. } => source.exit_code(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
