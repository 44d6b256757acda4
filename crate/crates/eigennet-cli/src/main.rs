//! Command-line driver wiring ingestion, validation, training, and
//! evaluation, with plot-ready data files as output.

mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(
    name = "eigennet",
    about = "RBF networks trained by minimizing the ground-state eigenvalue of a mutual-information potential",
    version
)]
struct Cli {
    /// Print a fully populated default configuration as JSON and exit.
    #[arg(long)]
    init: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args, Clone, Default)]
struct Overrides {
    /// Configuration file; defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset CSV; overrides the config. `synthetic` forces the surrogate.
    #[arg(long)]
    data: Option<String>,
    /// Master seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Column statistics and the correlation matrix of the dataset,
    /// original and normalized.
    Stats {
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Closed-form-versus-quadrature validation suite.
    Validate {
        #[command(flatten)]
        overrides: Overrides,
        /// Draws per formula.
        #[arg(long, default_value_t = 100)]
        draws: usize,
    },
    /// Run the genetic algorithm and persist solution, history, and
    /// dispersion data.
    Train {
        #[command(flatten)]
        overrides: Overrides,
        /// Override the cycle count of every island.
        #[arg(long)]
        cycles: Option<usize>,
        /// Override the island count (niche radii follow (i-1)/10).
        #[arg(long)]
        islands: Option<usize>,
        /// Override the population of every island.
        #[arg(long)]
        population: Option<usize>,
    },
    /// Recompute the full report for a persisted solution on both
    /// partitions.
    Evaluate {
        #[command(flatten)]
        overrides: Overrides,
        /// Solution JSON produced by `train`.
        #[arg(long)]
        solution: PathBuf,
        /// Also write the pointwise χ(x) refinement table to this CSV.
        #[arg(long)]
        chi_table: Option<PathBuf>,
        /// Iteration cap for the χ(x) refinement.
        #[arg(long, default_value_t = 20)]
        chi_iterations: usize,
        /// Debug: dump the assembled train-partition matrices as CSV
        /// into this directory.
        #[arg(long)]
        dump_matrices: Option<PathBuf>,
    },
}

/// Exit kinds: 0 success, 1 numeric/acceptance failure, 2 input error.
pub enum AppError {
    Input(String),
    Numeric(String),
}

impl AppError {
    fn code(&self) -> u8 {
        match self {
            AppError::Input(_) => 2,
            AppError::Numeric(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            AppError::Input(m) | AppError::Numeric(m) => m,
        }
    }
}

pub fn input_err(e: impl std::fmt::Display) -> AppError {
    AppError::Input(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.init {
        let cfg = RunConfig::default();
        println!("{}", serde_json::to_string_pretty(&cfg).expect("default config serializes"));
        return ExitCode::SUCCESS;
    }
    let Some(command) = cli.command else {
        eprintln!("error: a subcommand is required (stats | validate | train | evaluate); see --help");
        return ExitCode::from(2);
    };
    let result = match command {
        Command::Stats { overrides } => report::cmd_stats(&overrides),
        Command::Validate { overrides, draws } => report::cmd_validate(&overrides, draws),
        Command::Train {
            overrides,
            cycles,
            islands,
            population,
        } => report::cmd_train(&overrides, cycles, islands, population),
        Command::Evaluate {
            overrides,
            solution,
            chi_table,
            chi_iterations,
            dump_matrices,
        } => report::cmd_evaluate(
            &overrides,
            &solution,
            chi_table.as_deref(),
            chi_iterations,
            dump_matrices.as_deref(),
        ),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}
