use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bta_inla::commands::{self, EXIT_ERROR};

#[derive(Parser)]
#[command(name = "bta-inla", version, about = "BTA solver and INLA-style inference for spatio-temporal models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the model; exits 0 on convergence, 2 at the iteration limit, 1 on error.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker count; falls back to the config, then BTA_INLA_WORKERS.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Time factorization and selected inversion over the configured ladder.
    Benchmark {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the dense-oracle equivalence checks.
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate { config, out } => commands::cmd_simulate(&config, &out),
        Command::Fit {
            config,
            data,
            out,
            workers,
        } => commands::cmd_fit(&config, &data, &out, workers),
        Command::Benchmark { config, out } => commands::cmd_benchmark(&config, &out).map(|(code, _)| code),
        Command::Selftest => Ok(commands::cmd_selftest()),
    };
    let code = result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        EXIT_ERROR
    });
    ExitCode::from(code as u8)
}
