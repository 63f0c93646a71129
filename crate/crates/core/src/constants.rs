//! Physical constants and the versioned atomic-data file.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::angular::HalfInt;
use crate::{Error, Result};

/// CODATA 2018 exact and recommended values, SI units.
pub mod si {
    pub const PLANCK: f64 = 6.626_070_15e-34;
    pub const HBAR: f64 = PLANCK / (2.0 * std::f64::consts::PI);
    pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
    pub const BOLTZMANN: f64 = 1.380_649e-23;
    pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
    pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_812_8e-12;
    pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
    pub const STANDARD_GRAVITY: f64 = 9.806_65;
}

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Environment variable that points at an alternative atomic-data file.
pub const CONSTANTS_ENV: &str = "RYDSIM_CONSTANTS";

const BUILTIN: &str = include_str!("../data/rb87.toml");
const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DefectEntry {
    pub l: u32,
    pub j: f64,
    pub delta0: f64,
    pub delta2: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DipoleData {
    /// Edmonds reduced element `<5p3/2||er||5s1/2>` in units of e·a0.
    pub d_5s_5p32_ea0: f64,
    /// Multiplier applied to the semiclassical `<nd5/2||er||5p3/2>`.
    pub rydberg_calibration: f64,
    pub calibration_n: u32,
}

/// Contents of the atomic-data file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomData {
    pub schema_version: u32,
    pub species: String,
    pub mass_kg: f64,
    pub rydberg_constant_hz: f64,
    pub bohr_magneton_hz_per_tesla: f64,
    pub ground_g_f: f64,
    pub quantum_defect: Vec<DefectEntry>,
    pub dipoles: DipoleData,
}

impl AtomData {
    /// The compiled-in ⁸⁷Rb table.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("builtin atomic data must parse")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let data: AtomData = toml::from_str(text)
            .map_err(|e| Error::Config(format!("atomic data: {e}\n{}", Self::schema_help())))?;
        data.validate()?;
        Ok(data)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!(
                "cannot read constants file {}: {e}\n{}",
                path.display(),
                Self::schema_help()
            ))
        })?;
        Self::parse(&text)
    }

    /// Explicit path first, then `$RYDSIM_CONSTANTS`, then the builtin table.
    pub fn resolve(path: Option<&Path>) -> Result<Self> {
        if let Some(p) = path {
            return Self::load(p);
        }
        match std::env::var_os(CONSTANTS_ENV) {
            Some(p) if !p.is_empty() => Self::load(Path::new(&p)),
            _ => Ok(Self::builtin()),
        }
    }

    pub fn builtin_text() -> &'static str {
        BUILTIN
    }

    fn schema_help() -> String {
        let schema: String = BUILTIN
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| format!("{l}\n"))
            .collect();
        format!("expected schema:\n{schema}")
    }

    fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if !(self.rydberg_constant_hz > 0.0) || !(self.mass_kg > 0.0) {
            return Err(Error::Config(
                "rydberg_constant_hz and mass_kg must be positive".into(),
            ));
        }
        for e in &self.quantum_defect {
            let j = HalfInt::from_f64(e.j)?;
            let l2 = 2 * e.l as i32;
            if j.twice() != l2 + 1 && j.twice() != l2 - 1 {
                return Err(Error::Config(format!(
                    "quantum_defect entry l={} j={} is not a valid fine-structure level",
                    e.l, e.j
                )));
            }
        }
        Ok(())
    }
}

impl Default for AtomData {
    fn default() -> Self {
        Self::builtin()
    }
}
