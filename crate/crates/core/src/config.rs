//! TOML scene files. Every section is optional and falls back to the
//! built-in defaults; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{ProtocolParams, ReadoutModel};
use crate::lensdesign::LensSpec;
use crate::raytrace::{FanParams, TraceLimits};
use crate::scene::SensorParams;

/// Oval design inputs not already fixed by the sensor geometry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LensDesign {
    pub design_index: f64,
    pub focal_distance_mm: f64,
    pub sample_count: usize,
}

impl Default for LensDesign {
    fn default() -> Self {
        Self {
            design_index: 1.44,
            focal_distance_mm: 20.0,
            sample_count: 2001,
        }
    }
}

/// `lens = "none"` or a `[lens]` table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LensChoice {
    Keyword(String),
    Design(LensDesign),
}

impl Default for LensChoice {
    fn default() -> Self {
        LensChoice::Design(LensDesign::default())
    }
}

impl LensChoice {
    pub fn design(&self) -> Option<&LensDesign> {
        match self {
            LensChoice::Design(d) => Some(d),
            LensChoice::Keyword(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub thetas_deg: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            thetas_deg: vec![-3.0, 0.0, 3.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FoldSection {
    pub discard_cycles: usize,
}

impl Default for FoldSection {
    fn default() -> Self {
        Self { discard_cycles: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneConfig {
    pub lens: LensChoice,
    pub sensor: SensorParams,
    pub sweep: SweepSection,
    pub fan: FanParams,
    pub trace: TraceLimits,
    pub readout: ReadoutModel,
    pub protocol: ProtocolParams,
    pub fold: FoldSection,
}

impl SceneConfig {
    pub fn from_toml_str(text: &str) -> std::result::Result<Self, String> {
        let cfg: SceneConfig = toml::from_str(text).map_err(|e| e.to_string())?;
        if let LensChoice::Keyword(k) = &cfg.lens {
            if k != "none" {
                return Err(format!("lens must be \"none\" or a table, got \"{k}\""));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io::read_text(path)?;
        Self::from_toml_str(&text).map_err(|m| Error::parse(path, m))
    }

    pub fn lens_spec(&self) -> Option<LensSpec> {
        self.lens
            .design()
            .map(|d| self.sensor.lens_spec(d.design_index, d.focal_distance_mm, d.sample_count))
    }

    /// Checks every section; problems from all sections are reported together.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        let mut collect = |r: Result<()>| {
            if let Err(e) = r {
                match e {
                    Error::Validation(p) => problems.extend(p),
                    other => problems.push(other.to_string()),
                }
            }
        };
        collect(self.fan.validate());
        collect(self.trace.validate());
        collect(self.readout.validate());
        collect(self.protocol.validate());
        if let Some(spec) = self.lens_spec() {
            collect(spec.validate());
        }
        if self.fold.discard_cycles >= self.protocol.cycles {
            problems.push(format!(
                "discard_cycles {} must be smaller than cycles {}",
                self.fold.discard_cycles, self.protocol.cycles
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// The effective configuration, as written next to every simulation output.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scene config is always representable")
    }
}
