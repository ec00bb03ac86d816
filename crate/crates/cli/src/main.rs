use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;
mod svg;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
    #[error("base point lies on the caustic")]
    OnCaustic,
    #[error("validation failed; see report.txt")]
    Validation,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::OnCaustic => 3,
            CliError::Validation => 4,
        }
    }
}

/// Caustics, phase portraits and bifurcation diagrams of gradient flows of
/// Lagrangian generating functions.
#[derive(Debug, Parser)]
#[command(name = "lagmap", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration. Missing keys take default values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads. Defaults to the number of cores.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Recorded in the manifest. All computations are deterministic.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Critical locus and caustic of the configured function.
    Caustic,
    /// Critical points and separatrices at one base point.
    Portrait {
        /// Base point, overriding `portrait.x`.
        #[arg(long, num_args = 2, value_names = ["X1", "X2"], allow_negative_numbers = true)]
        x: Option<Vec<f64>>,
    },
    /// Scan the base window and assemble the bifurcation diagram.
    Diagram,
    /// Caustics of the elliptic umbilic slices `+ t*y1^2`.
    Slices,
    /// Re-run the validation checks on a stored diagram.
    Validate {
        /// Diagram JSON. Defaults to `<out>/diagram.json`.
        diagram: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: --workers must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
