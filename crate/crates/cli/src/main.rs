//! `pcdnse` — run simulations, fit solitons and regenerate figure datasets.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 configuration error,
//! 3 numerical failure (a manifest with `status` set is still written).

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use pcdnse::scenarios::{ExperimentOptions, Figure};
use pcdnse::Boundary;

use config::Overrides;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<pcdnse::Error> for CliError {
    fn from(e: pcdnse::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else if matches!(e, pcdnse::Error::Io(_)) {
            CliError::Io(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Io(format!("serialization: {e}"))
    }
}

#[derive(Parser)]
#[command(name = "pcdnse", version, about)]
struct Cli {
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config file).
    #[arg(long, global = true, env = "PCDNSE_OUTPUT_DIR")]
    out: Option<PathBuf>,
    /// Solver preset: pcdnse, pcdnse_tight, langevin, collective, two_soliton.
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    rtol: Option<f64>,
    #[arg(long, global = true)]
    atol: Option<f64>,
    /// Worker threads for independent runs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Effective constants: detuning sweep, single point, inversion.
    Params,
    /// Integrate one model from the configuration file.
    Simulate,
    /// Fit the sech ansatz to a field CSV or a directory of snapshots.
    Fit {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = BoundaryArg::Periodic)]
        boundary: BoundaryArg,
    },
    /// Regenerate a figure dataset and check it.
    Experiment {
        #[arg(value_enum)]
        figure: FigureArg,
        /// Fig5: integrate the collective equations to Jt = 2e6.
        #[arg(long)]
        full_horizon: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BoundaryArg {
    Periodic,
    Open,
}

#[derive(Clone, Copy, ValueEnum)]
enum FigureArg {
    Fig2,
    Fig3a,
    Fig3b,
    Fig4,
    Fig5,
    Fig6,
    All,
}

impl FigureArg {
    fn figures(self) -> Vec<Figure> {
        match self {
            FigureArg::Fig2 => vec![Figure::Fig2],
            FigureArg::Fig3a => vec![Figure::Fig3a],
            FigureArg::Fig3b => vec![Figure::Fig3b],
            FigureArg::Fig4 => vec![Figure::Fig4],
            FigureArg::Fig5 => vec![Figure::Fig5],
            FigureArg::Fig6 => vec![Figure::Fig6],
            FigureArg::All => Figure::ALL.to_vec(),
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be >= 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    for (name, v) in [("--rtol", cli.rtol), ("--atol", cli.atol)] {
        if v.is_some_and(|v| !(v > 0.0)) {
            return Err(CliError::Config(format!("{name} must be positive")));
        }
    }
    match cli.command {
        Command::Params => {
            let manifest = commands::params(cli.config.as_deref(), &cli.out)?;
            println!("{}", manifest.display());
        }
        Command::Simulate => {
            let Some(config) = cli.config else {
                return Err(CliError::Config("simulate needs --config".into()));
            };
            let over = Overrides { out: cli.out, preset: cli.preset, rtol: cli.rtol, atol: cli.atol };
            let manifest = commands::simulate(&config, &over)?;
            println!("{}", manifest.display());
        }
        Command::Fit { input, boundary } => {
            let boundary = match boundary {
                BoundaryArg::Periodic => Boundary::Periodic,
                BoundaryArg::Open => Boundary::Open,
            };
            let manifest = commands::fit(&input, boundary, &cli.out)?;
            println!("{}", manifest.display());
        }
        Command::Experiment { figure, full_horizon } => {
            let opts = ExperimentOptions { full_horizon, rtol: cli.rtol, atol: cli.atol };
            if !commands::experiment(&figure.figures(), &opts, &cli.out)? {
                return Err(CliError::Numerical("some runs failed; see manifest.json".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pcdnse: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
