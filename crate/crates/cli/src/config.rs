//! Run configuration: one TOML file with sections, `--set` overrides and defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub constants: ConstantsSection,
    pub mc: McSection,
    pub levels: LevelsSection,
    pub interaction: InteractionSection,
    pub beams: BeamsSection,
    pub pulse: PulseSection,
    pub double_pulse: DoublePulseSection,
    pub cloud: CloudSection,
    pub ensemble: EnsembleSection,
    pub trap: TrapSection,
    pub detection: DetectionSection,
    pub loss: LossSection,
    pub histogram: HistogramSection,
    pub preselect: PreselectSection,
    pub drop_recapture: DropRecaptureSection,
    pub fit: FitSection,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConstantsSection {
    /// Atomic-data file; the built-in ⁸⁷Rb table when absent.
    pub path: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McSection {
    pub seed: u64,
    /// Ensemble trials.
    pub trials: usize,
    /// Doppler velocity samples for single-atom traces.
    pub doppler_samples: usize,
    pub t_max_us: f64,
    pub t_points: usize,
    pub bootstrap: usize,
}

impl Default for McSection {
    fn default() -> Self {
        McSection { seed: 1, trials: 2000, doppler_samples: 2000, t_max_us: 8.0, t_points: 81, bootstrap: 200 }
    }
}

impl McSection {
    pub fn times_s(&self) -> Vec<f64> {
        let n = self.t_points.max(2);
        (0..n).map(|k| self.t_max_us * 1e-6 * k as f64 / (n - 1) as f64).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LevelsSection {
    /// Principal quantum number of the `nd5/2` pair state.
    pub n: u32,
    pub field_tesla: f64,
}

impl Default for LevelsSection {
    fn default() -> Self {
        LevelsSection { n: 43, field_tesla: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InteractionSection {
    /// `2j` of the `41f` level whose defect normalizes the operator (5 or 7).
    pub reference_twice_j_f: i32,
    pub c6_hz_um6: f64,
    /// Use the C6 computed from the reference channel instead of `c6_hz_um6`.
    pub computed_c6: bool,
    /// Give every pair this eigenvalue instead of sampling.
    pub force_d: Option<f64>,
    /// Drop basis states holding a pair shifted by more than this; absent keeps the full space.
    pub blockade_cutoff_mhz: Option<f64>,
}

impl Default for InteractionSection {
    fn default() -> Self {
        InteractionSection {
            reference_twice_j_f: 7,
            c6_hz_um6: 450e9,
            computed_c6: false,
            force_d: None,
            blockade_cutoff_mhz: Some(100.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeamsSection {
    pub p780_w: f64,
    pub p480_w: f64,
    pub waist_um: f64,
    pub delta_ghz: f64,
    pub lambda780_nm: f64,
    pub lambda480_nm: f64,
}

impl Default for BeamsSection {
    fn default() -> Self {
        BeamsSection { p780_w: 1.85e-6, p480_w: 10.7e-3, waist_um: 10.0, delta_ghz: -3.4, lambda780_nm: 780.241, lambda480_nm: 480.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub rabi_mhz: f64,
    /// Take the Rabi frequency from `[beams]` instead of `rabi_mhz`.
    pub from_beams: bool,
    pub detuning_mhz: f64,
    pub temperature_mk: f64,
}

impl Default for PulseSection {
    fn default() -> Self {
        PulseSection { rabi_mhz: 0.49, from_beams: false, detuning_mhz: 0.0, temperature_mk: 1.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DoublePulseSection {
    pub rabi_mhz: f64,
    pub gap_us: f64,
    pub gap_detuning_mhz: f64,
    pub pulse_max_us: f64,
    pub points: usize,
    /// Average over the `[pulse]` temperature's Doppler distribution.
    pub doppler: bool,
}

impl Default for DoublePulseSection {
    fn default() -> Self {
        DoublePulseSection { rabi_mhz: 0.7, gap_us: 2.0, gap_detuning_mhz: 0.53, pulse_max_us: 4.0, points: 201, doppler: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CloudSection {
    pub sigma_x_um: f64,
    pub sigma_y_um: f64,
    pub sigma_z_um: f64,
}

impl Default for CloudSection {
    fn default() -> Self {
        CloudSection { sigma_x_um: 3.9, sigma_y_um: 0.43, sigma_z_um: 0.43 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSection {
    pub mean_atoms: f64,
    /// Use exactly this many atoms instead of Poisson loading.
    pub fixed_atoms: Option<usize>,
    pub cap: usize,
    /// Also write per-trial positions and sampled eigenvalues.
    pub dump_trials: bool,
}

impl Default for EnsembleSection {
    fn default() -> Self {
        EnsembleSection { mean_atoms: 1.7, fixed_atoms: None, cap: 12, dump_trials: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrapSection {
    pub depth_mk: f64,
    pub waist_um: f64,
    pub wavelength_nm: f64,
    pub power_w: f64,
}

impl Default for TrapSection {
    fn default() -> Self {
        TrapSection { depth_mk: 10.0, waist_um: 2.7, wavelength_nm: 1030.0, power_w: 0.57 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionSection {
    pub rate_per_s: f64,
    pub background_per_s: f64,
    pub probe_time_ms: f64,
    pub duty_factor: f64,
    pub collection_efficiency: f64,
}

impl Default for DetectionSection {
    fn default() -> Self {
        DetectionSection { rate_per_s: 1e4, background_per_s: 0.0, probe_time_ms: 12.0, duty_factor: 2.5, collection_efficiency: 0.027 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LossSection {
    pub lifetime_s: f64,
    pub probe_survival: f64,
    pub pair_loss_per_s: f64,
    pub hold_s: f64,
}

impl Default for LossSection {
    fn default() -> Self {
        LossSection { lifetime_s: 3.0, probe_survival: 0.88, pair_loss_per_s: 1000.0, hold_s: 0.03 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HistogramSection {
    pub mean_atoms: f64,
    pub trials: usize,
}

impl Default for HistogramSection {
    fn default() -> Self {
        HistogramSection { mean_atoms: 1.0, trials: 20_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreselectSection {
    pub mean_atoms: f64,
    pub trials: usize,
}

impl Default for PreselectSection {
    fn default() -> Self {
        PreselectSection { mean_atoms: 1.0, trials: 20_000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DropRecaptureSection {
    pub temperature_mk: f64,
    pub t_drop_us: Vec<f64>,
    pub trials: usize,
    /// CSV of measured `t_drop_us, recapture` to turn into a temperature.
    pub data: Option<PathBuf>,
    pub grid_min_mk: f64,
    pub grid_max_mk: f64,
    pub grid_points: usize,
}

impl Default for DropRecaptureSection {
    fn default() -> Self {
        DropRecaptureSection {
            temperature_mk: 1.0,
            t_drop_us: vec![2.0, 5.0, 10.0, 20.0, 40.0],
            trials: 10_000,
            data: None,
            grid_min_mk: 0.1,
            grid_max_mk: 3.0,
            grid_points: 25,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    /// Trace CSV with `t_us` and a value column.
    pub input: Option<PathBuf>,
    /// Value column; the second column when absent.
    pub column: Option<String>,
}

impl RunConfig {
    /// Reads `path` (or starts empty), applies `section.key=value` overrides and validates.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, CliError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("cannot read config {}: {e}", p.display())))?,
            None => String::new(),
        };
        let mut table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("config is not valid TOML: {e}")))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))?;
        Ok(cfg)
    }

    /// Canonical TOML text of the full configuration, defaults included.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.echo().as_bytes()))
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Config(format!("override `{assignment}` must look like section.key=value")))?;
    let (section, field) = key
        .trim()
        .split_once('.')
        .ok_or_else(|| CliError::Config(format!("override key `{key}` must be section.key")))?;
    let value = match format!("v = {}", raw.trim()).parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.trim().to_string()),
    };
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field.to_string(), value);
            Ok(())
        }
        _ => Err(CliError::Config(format!("`{section}` is not a section"))),
    }
}

/// Default configuration as TOML, for `--help`.
pub fn defaults_help() -> String {
    RunConfig::default().echo()
}
