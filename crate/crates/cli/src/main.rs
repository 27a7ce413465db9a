//! `doblab` — discretize servo models, tune disturbance observers, and run
//! closed-loop experiments from JSON scenario files.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use doblab::plant::{DEFAULT_NOMINAL_FRICTION, DEFAULT_NOMINAL_INERTIA};
use doblab::sim::DEFAULT_TS;

use crate::config::ModeArg;

#[derive(Debug, Parser)]
#[command(
    name = "doblab",
    version,
    about = "Disturbance-observer experiments for a servo plant"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the zero-order-hold model Ad, Bd, Dd.
    Discretize(PlantArgs),
    /// Compute observer gains and report the error-dynamics eigenvalues.
    Tune {
        #[command(flatten)]
        plant: PlantArgs,
        #[command(flatten)]
        observer: ObserverArgs,
    },
    /// Run one scenario and write its trace and metrics.
    Sim {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        observer: ObserverArgs,
    },
    /// Run several observer variants on a shared scenario and rank them.
    Compare {
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Debug, Args)]
struct PlantArgs {
    /// Inertia J [kg·m²].
    #[arg(long = "j", default_value_t = DEFAULT_NOMINAL_INERTIA, allow_negative_numbers = true)]
    inertia: f64,
    /// Viscous friction b [N·m·s/rad].
    #[arg(long = "b", default_value_t = DEFAULT_NOMINAL_FRICTION, allow_negative_numbers = true)]
    friction: f64,
    /// Sampling period Ts [s].
    #[arg(long = "ts", default_value_t = DEFAULT_TS, allow_negative_numbers = true)]
    ts: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ObserverKind {
    None,
    Conventional,
    Hp,
}

#[derive(Debug, Args)]
struct ObserverArgs {
    /// Observer type (for `sim`, overrides the scenario's observer).
    #[arg(long)]
    observer: Option<ObserverKind>,
    /// Conventional gain k; the error coefficient is 1 − k.
    #[arg(long, allow_negative_numbers = true)]
    k: Option<f64>,
    /// First requested eigenvalue, e.g. `0.3` or `0.2+0.4i`.
    #[arg(long, allow_negative_numbers = true)]
    lambda1: Option<String>,
    /// Second requested eigenvalue.
    #[arg(long, allow_negative_numbers = true)]
    lambda2: Option<String>,
    /// Accept error dynamics with spectral radius ≥ 1.
    #[arg(long)]
    allow_unstable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Trace,
    Metrics,
    Summary,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario (sim) or comparison (compare) JSON file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long)]
    mode: Option<ModeArg>,
    /// Plant integration substeps per sample in continuous mode.
    #[arg(long)]
    substeps: Option<usize>,
    #[arg(long, value_delimiter = ',', default_value = "trace,metrics,summary")]
    emit: Vec<Emit>,
    /// Fraction of the run averaged for the steady-state error.
    #[arg(long, default_value_t = doblab::metrics::DEFAULT_WINDOW)]
    ss_window: f64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Discretize(p) => commands::discretize(&p),
        Command::Tune { plant, observer } => commands::tune(&plant, &observer),
        Command::Sim { run, observer } => commands::sim(&run, &observer),
        Command::Compare { run } => commands::compare(&run),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
