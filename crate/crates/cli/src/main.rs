//! `slabloc`: synthesis, region maps, localization and Monte Carlo studies
//! for impacts on a concrete slab. Outputs are CSV plus a manifest.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use slabloc::localize::Algorithm;

use crate::config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl From<slabloc::Error> for CliError {
    fn from(e: slabloc::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "slabloc",
    version,
    about = "Flexural-wave synthesis and sign-of-TDOA localization"
)]
struct Cli {
    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Monte Carlo seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AlgoArg {
    SoTdoa,
    SoTdoaGrid,
    Hyperbolic,
    All,
}

impl AlgoArg {
    fn algorithms(self) -> Vec<Algorithm> {
        match self {
            Self::SoTdoa => vec![Algorithm::SoTdoaRegion],
            Self::SoTdoaGrid => vec![Algorithm::SoTdoaGrid],
            Self::Hyperbolic => vec![Algorithm::Hyperbolic],
            Self::All => Algorithm::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Synthesize free-field traces, or the bounded-plate trace and its STFT.
    Synth {
        /// Source–sensor distance in metres (repeatable); defaults to the config list.
        #[arg(long, conflicts_with = "room_source_sensor")]
        distance: Vec<f64>,
        /// Bounded-plate mode using the configured room, source and sensor.
        #[arg(long)]
        room_source_sensor: bool,
    },
    /// Perceived velocity: analytic law and threshold-crossing numerics.
    VelocityCurve,
    /// Enumerate the bisector regions of the configured sensor layout.
    Regions,
    /// Localize a source from a TOA table.
    Localize {
        /// CSV with columns sensor_id, toa_s[, method].
        #[arg(long)]
        toas: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        algo: AlgoArg,
    },
    /// RMSE study over noise levels.
    Montecarlo {
        #[arg(long, value_enum, default_value = "all")]
        algo: AlgoArg,
    },
    /// Print the effective configuration in canonical form.
    Config,
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.monte_carlo.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    let ctx = commands::Context::new(cfg, cli.config.clone());
    match cli.command {
        Command::Synth {
            distance,
            room_source_sensor,
        } => {
            if room_source_sensor {
                commands::synth_bounded(&ctx)
            } else {
                commands::synth_free(&ctx, &distance)
            }
        }
        Command::VelocityCurve => commands::velocity_curve(&ctx),
        Command::Regions => commands::regions(&ctx),
        Command::Localize { toas, algo } => commands::localize(&ctx, &toas, &algo.algorithms()),
        Command::Montecarlo { algo } => commands::monte_carlo(&ctx, &algo.algorithms()),
        Command::Config => {
            print!("{}", ctx.cfg.to_toml());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SLAB_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("slabloc: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
