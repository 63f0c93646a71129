//! Command-line front end for the Rydberg excitation simulator.
//!
//! Every run is fixed by one TOML configuration (plus `--set` overrides and
//! `--seed`). Outputs are CSV files carrying the config hash and seed in `#`
//! comment lines, written beside an echo of the full configuration.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::commands::{Context, Figure, Written};
use crate::config::RunConfig;
pub use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(name = "rydsim", version, about = "Single- and few-atom Rydberg excitation simulator", after_help = after_help())]
pub struct Cli {
    /// TOML configuration; every key is optional.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides `mc.seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// `section.key=value`, repeatable; the value is parsed as TOML, else taken as a string.
    #[arg(long = "set", global = true, value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = "rydsim-out")]
    pub out: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Defects, effective quantum numbers and energies of the pair levels; Förster defects; Zeeman shift.
    Levels,
    /// Van der Waals eigenvalues and overlaps with the laser-excited pair state.
    VdwSpectrum,
    /// Single-atom Rabi flopping, Doppler averaged when `pulse.temperature_mk > 0`.
    Rabi,
    /// Two half pulses separated by a gap.
    DoublePulse,
    /// Retained fraction of an interacting atom cloud.
    Ensemble,
    /// Fluorescence count histogram after Poisson loading.
    Histogram,
    /// Joint first/second measurement classes.
    Preselect,
    /// Release-recapture curve, or a temperature when `drop_recapture.data` is set.
    DropRecapture,
    /// Damped-cosine fit of a trace CSV named by `fit.input`.
    Fit,
    /// Runs a figure recipe with its physical parameters at their defaults.
    Reproduce {
        #[arg(value_enum)]
        figure: Figure,
    },
    /// Clebsch-Gordan coefficient `<j1 m1; j2 m2|j m>`.
    #[command(hide = true)]
    Angular {
        #[arg(allow_negative_numbers = true, num_args = 6)]
        args: Vec<f64>,
    },
}

fn after_help() -> String {
    format!("Default configuration:\n\n{}", config::defaults_help())
}

impl Cli {
    pub fn load_config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = RunConfig::load(self.config.as_deref(), &self.overrides)?;
        if let Some(s) = self.seed {
            cfg.mc.seed = s;
        }
        Ok(cfg)
    }
}

/// Runs one invocation and returns the files written.
pub fn run(cli: &Cli) -> Result<Written, CliError> {
    if let Command::Angular { args } = &cli.command {
        commands::angular(args)?;
        return Ok(Vec::new());
    }
    let cfg = cli.load_config()?;
    let dir = cli.out.as_path();
    if let Command::Reproduce { figure } = cli.command {
        return commands::reproduce(cfg, figure, dir);
    }
    let ctx = Context::new(cfg)?;
    match &cli.command {
        Command::Levels => commands::levels(&ctx, dir),
        Command::VdwSpectrum => commands::vdw_spectrum(&ctx, dir),
        Command::Rabi => commands::rabi(&ctx, dir),
        Command::DoublePulse => commands::double_pulse(&ctx, dir),
        Command::Ensemble => commands::ensemble(&ctx, dir),
        Command::Histogram => commands::histogram(&ctx, dir),
        Command::Preselect => commands::preselect(&ctx, dir),
        Command::DropRecapture => commands::drop_recapture(&ctx, dir),
        Command::Fit => commands::fit(&ctx, dir),
        Command::Reproduce { .. } | Command::Angular { .. } => unreachable!("handled above"),
    }
}
