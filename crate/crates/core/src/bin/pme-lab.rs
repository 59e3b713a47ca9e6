use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pme_core::experiment::{list_scenarios, run, ExperimentConfig, RunError};

/// Porous medium equation experiments.
#[derive(Parser)]
#[command(name = "pme-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Directory for artifacts; overrides `output_dir` in the config.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Corpus and pair seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Progress and per-check lines on stderr.
    #[arg(long, short, global = true)]
    verbose: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario described by a TOML config.
    Run { config: PathBuf },
    /// List scenario names with one-line descriptions.
    List,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            print!("{}", list_scenarios());
            ExitCode::SUCCESS
        }
        Command::Run { config } => {
            let result = ExperimentConfig::from_path(&config).map_err(RunError::from).and_then(|mut cfg| {
                if let Some(seed) = cli.seed {
                    cfg.seed = seed;
                }
                run(&cfg, cli.output_dir.as_deref(), cli.verbose)
            });
            match result {
                Ok(outcome) => {
                    for c in &outcome.verdict.checks {
                        println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
                    }
                    println!("artifacts in {}", outcome.output_dir.display());
                    if outcome.verdict.pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code())
                }
            }
        }
    }
}
