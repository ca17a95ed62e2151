use clap::{Parser, Subcommand};
use clustermax_cli::config;
use clustermax_cli::runner::{self, RunOptions};
use std::path::PathBuf;
use std::process::ExitCode;

/// Experiment harness for marked renewal cluster process simulations.
#[derive(Parser)]
#[command(name = "clustermax", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config to completion and write its artifacts.
    Run {
        /// Path to the experiment config (TOML).
        config: String,
        /// Override the config's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (defaults to the number of cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (falls back to $CLUSTERMAX_OUT, then the
        /// config's `output` key).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate {
        /// Path to the experiment config (TOML).
        config: String,
    },
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config: path,
            seed,
            workers,
            out,
        } => {
            let cfg = match config::load(&path, seed) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let options = RunOptions {
                workers,
                out_override: out,
            };
            match runner::run(&cfg, &options) {
                Ok(outcome) => {
                    println!(
                        "{}: {} (artifacts in {})",
                        cfg.kind.name(),
                        if outcome.all_pass { "pass" } else { "FAIL" },
                        outcome.output_dir.display()
                    );
                    if outcome.all_pass {
                        ExitCode::SUCCESS
                    } else {
                        ExitCode::from(1)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
        Command::Validate { config: path } => match config::load(&path, None) {
            Ok(cfg) => {
                println!("{path}: valid {} config", cfg.kind.name());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
    }
}
