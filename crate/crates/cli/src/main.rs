//! `decoh`: config-driven runner for spin-bath decoherence experiments.
//!
//! Exit codes: 0 success, 2 invalid config, 3 model violation,
//! 4 numerical-invariant breach.

mod config;
mod pipeline;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use config::{ExperimentConfig, Kind};
use decoh_core::error::Error;
use pipeline::Overrides;

#[derive(Parser)]
#[command(name = "decoh", version, about = "Spin-bath decoherence experiment runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Path to a JSON experiment config.
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Preferred-context membership tolerance (overrides the config).
    #[arg(long)]
    tol: Option<f64>,
    /// Coupling-draw seed (overrides the config's coupling seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Measurement run: evolve the correlated state, emit series + summary.
    Run(Common),
    /// Sweep a scalar parameter; per-value artifacts plus combined sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Parameter to sweep: lambda, delta, or n_env.
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Predictability sieve over a Bloch-axis candidate grid.
    Sieve(Common),
    /// Preferred-context membership and stability norms for a pointer axis.
    CheckPointer(Common),
}

/// Exit code for a library error, per the documented contract.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ModelViolation(_) | Error::StructureViolation(_) => 3,
        Error::InvariantBreach(_) => 4,
        _ => 2,
    }
}

fn load(common: &Common, expected: Kind) -> Result<ExperimentConfig, Error> {
    let cfg = ExperimentConfig::load(&common.config)?;
    if cfg.kind != expected {
        return Err(Error::InvalidInput(format!(
            "config kind {:?} does not match this subcommand",
            cfg.kind
        )));
    }
    Ok(cfg)
}

fn overrides(common: &Common) -> Overrides {
    Overrides {
        out: common.out.clone(),
        tol: common.tol,
        seed: common.seed,
    }
}

fn dispatch(cmd: &Cmd) -> Result<i32, Error> {
    match cmd {
        Cmd::Run(c) => {
            let cfg = load(c, Kind::MeasurementRun)?;
            pipeline::cmd_run(&cfg, &overrides(c))?;
            Ok(0)
        }
        Cmd::Sweep {
            common,
            param,
            values,
        } => {
            let cfg = load(common, Kind::RegimeSweep)?;
            pipeline::cmd_sweep(&cfg, &overrides(common), param, values)
        }
        Cmd::Sieve(c) => {
            let cfg = load(c, Kind::Sieve)?;
            pipeline::cmd_sieve(&cfg, &overrides(c))?;
            Ok(0)
        }
        Cmd::CheckPointer(c) => {
            let cfg = load(c, Kind::PointerCheck)?;
            pipeline::cmd_check_pointer(&cfg, &overrides(c))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let code = match dispatch(&cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    // Timing goes to stderr so the on-disk artifacts stay byte-identical
    // across reruns of the same config.
    eprintln!("wall_clock_s={:.3}", start.elapsed().as_secs_f64());
    ExitCode::from(code as u8)
}
