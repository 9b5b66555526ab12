//! Command-line front end: configured evolutions, verification suites,
//! external-field checks, gauge-linearization fits and config sweeps.
//!
//! Exit codes: 0 success, 1 verification suite ran with failures, 2 invalid
//! configuration or arguments, 3 runtime abort (density floor, blow-up) with
//! partial diagnostics preserved.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod plot;
mod report;

#[derive(Parser)]
#[command(
    name = "borelkin",
    version,
    about = "Quantum kinematics and nonlinear Schrödinger dynamics on flat periodic manifolds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configured evolution; writes snapshots, diagnostics CSV,
    /// summary JSON and optional SVG plots.
    Evolve { config: PathBuf },
    /// Run a verification suite
    /// (algebra | imprimitivity | poisson | ehrenfest-classical | all).
    Verify {
        suite: String,
        /// Also write the JSON report to this path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check admissibility of a constant external field on the square torus.
    CheckField {
        #[arg(long)]
        phi0: f64,
        #[arg(long)]
        e: f64,
        #[arg(long)]
        hbar: f64,
        /// Torus extent per axis.
        #[arg(long, default_value_t = std::f64::consts::TAU)]
        extent: f64,
    },
    /// Gauge-transform an exact linear trajectory and fit it against the
    /// evolution family.
    GaugeFit { config: PathBuf },
    /// Run every .toml run-config in a directory concurrently.
    Sweep { dir: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Evolve { config } => commands::evolve::run(&config),
        Command::Verify { suite, out } => commands::verify::run(&suite, out.as_deref()),
        Command::CheckField { phi0, e, hbar, extent } => {
            commands::check_field::run(phi0, e, hbar, extent)
        }
        Command::GaugeFit { config } => commands::gauge_fit::run(&config),
        Command::Sweep { dir } => commands::sweep::run(&dir),
    };
    match outcome {
        Ok(code) => ExitCode::from(code as u8),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
