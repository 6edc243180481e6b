//! `phaseturb`: command-line front end of the phase-turbulence toolkit.
//!
//! Every subcommand either writes a run directory (`manifest.json`, CSV time
//! series, `report.json`, snapshots) or prints a JSON report on stdout.
//!
//! Exit codes:
//!
//! * `0` success, every gate passed;
//! * `1` a verification gate failed, or the integration left the regime the
//!   checks are defined for (blow-up, phase slip, singular quotient);
//! * `2` usage or configuration error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;

#[derive(Debug, Parser)]
#[command(name = "phaseturb", version, about = "Phase turbulence in the 1D complex Ginzburg-Landau equation")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the time-dependent subcommands.
#[derive(Debug, Args)]
struct RunArgs {
    /// Configuration file, or a `manifest.json` of an earlier run.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Scaled time between snapshots; overrides `[time] snapshot_interval`.
    #[arg(long = "snapshot-every")]
    snapshot_every: Option<f64>,
    /// Also write whitespace-separated `.dat` tables for gnuplot.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the Ginzburg-Landau equation directly and extract (s, eta, mu).
    SimulateCgl(RunArgs),
    /// Integrate the Kuramoto-Sivashinsky equation for the phase derivative.
    SimulateKs(RunArgs),
    /// Integrate the coupled amplitude/phase system with full diagnostics.
    SimulateCoupled(RunArgs),
    /// Run the eps_hat sweep and evaluate the scaling gates.
    Compare(RunArgs),
    /// Check the symbol inequalities at every grid wavenumber.
    VerifySymbols {
        /// Scaled eps_hat.
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        alpha: f64,
        /// Scaled period of the grid.
        #[arg(long = "L", default_value_t = 40.0)]
        l: f64,
        /// Number of grid points.
        #[arg(long = "N", default_value_t = 512)]
        n: usize,
    },
    /// Build the comparison function phi and check its estimates.
    VerifyCoercive {
        /// Period.
        #[arg(long = "L")]
        l: f64,
        /// Unscaled eps; defaults to the binding upper limit for this L.
        #[arg(long)]
        eps: Option<f64>,
        /// Random antisymmetric test fields per gamma.
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Run on the calling thread only.
        #[arg(long)]
        sequential: bool,
    },
    /// Print every norm of a serialized field.
    Norms {
        /// Field file in the spectral text format.
        #[arg(long)]
        field: PathBuf,
        #[arg(long, default_value_t = 6.0)]
        sigma: f64,
        #[arg(long, default_value_t = 2.0)]
        delta: f64,
    },
    /// Test initial data for membership of the admissible class.
    CheckClassC {
        #[arg(long)]
        config: PathBuf,
        /// Scaled initial phase; defaults to the configured random phase.
        #[arg(long)]
        eta: Option<PathBuf>,
        /// Scaled initial amplitude; defaults to the slaved amplitude.
        #[arg(long)]
        s: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::SimulateCgl(a) => commands::simulate_cgl(&a.config, a.out, a.snapshot_every, a.gnuplot),
        Command::SimulateKs(a) => commands::simulate_ks(&a.config, a.out, a.snapshot_every, a.gnuplot),
        Command::SimulateCoupled(a) => commands::simulate_coupled(&a.config, a.out, a.snapshot_every, a.gnuplot),
        Command::Compare(a) => commands::compare(&a.config, a.out, a.snapshot_every, a.gnuplot),
        Command::VerifySymbols { eps, alpha, l, n } => commands::verify_symbols(eps, alpha, l, n),
        Command::VerifyCoercive { l, eps, trials, seed, sequential } => {
            commands::verify_coercive(l, eps, trials, seed, sequential)
        }
        Command::Norms { field, sigma, delta } => commands::norms(&field, sigma, delta),
        Command::CheckClassC { config, eta, s } => commands::check_class_c(&config, eta.as_deref(), s.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{f}");
            ExitCode::from(f.code())
        }
    }
}
