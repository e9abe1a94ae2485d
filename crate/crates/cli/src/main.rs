use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use nehari_cli::config::{Overrides, RunConfig};
use nehari_cli::run::{run, Subcommand};
use nehari_cli::{exit_code, EXIT_BAD_CONFIG};

/// Ground states and prescribed-energy critical points of nonlinear
/// elliptic problems.
#[derive(Debug, Parser)]
#[command(name = "nehari", version)]
struct Cli {
    #[arg(value_enum)]
    command: Subcommand,
    /// TOML run configuration; documented defaults apply when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Root directory for run outputs.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long = "grid-n")]
    grid_n: Option<usize>,
    /// One value or a comma-separated list.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    c: Option<Vec<f64>>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = match &cli.config {
        Some(path) => match RunConfig::load(path) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("{e}");
                return ExitCode::from(EXIT_BAD_CONFIG);
            }
        },
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides { out: cli.out, seed: cli.seed, grid_n: cli.grid_n, c: cli.c });
    match run(cli.command, &cfg) {
        Ok(rec) => {
            print!("{}", rec.summary);
            println!("run directory: {}", rec.dir.display());
            ExitCode::from(rec.status)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
