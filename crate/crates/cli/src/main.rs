use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use coexist_cli::{describe, run, ExperimentConfig, Profile, RunOptions};
use coexist_core::scenario::generate_scenario;

#[derive(Parser)]
#[command(name = "coexist", version, about = "Wi-Fi 6E / 5G NR-U coexistence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a sweep and write its CSV files.
    Run {
        config: PathBuf,
        /// Worker threads (0: one per core, or the config's `workers`).
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, default_value = "results")]
        out: PathBuf,
        /// Override the config's duration and seed count.
        #[arg(long, value_enum)]
        profile: Option<Profile>,
        /// Write a JSON-lines event log per simulated realization.
        #[arg(long)]
        trace: bool,
        /// Check the config and exit without running or writing anything.
        #[arg(long)]
        validate_only: bool,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Print the sweep plan without running it.
    Describe {
        config: PathBuf,
        #[arg(long, default_value_t = 0)]
        workers: usize,
        #[arg(long, value_enum)]
        profile: Option<Profile>,
    },
    /// Print one generated scenario as JSON.
    Scenario {
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 10)]
        n_gnb: usize,
    },
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { config, workers, out, profile, trace, validate_only, quiet } => {
            let cfg = ExperimentConfig::load(&config, profile)?;
            if validate_only {
                eprintln!("{}: ok, {} cells, {} rows", config.display(), cfg.cells.len(), cfg.n_rows());
                return Ok(());
            }
            let opts = RunOptions { workers, out_dir: Some(out.clone()), trace, progress: !quiet };
            let output = run(&cfg, &opts).with_context(|| format!("running {}", config.display()))?;
            eprintln!("wrote {} rows to {}", output.rows.len(), out.join(&cfg.output).display());
        }
        Command::Describe { config, workers, profile } => {
            print!("{}", describe(&ExperimentConfig::load(&config, profile)?, workers));
        }
        Command::Scenario { seed, n_gnb } => {
            println!("{}", generate_scenario(seed, n_gnb)?.to_json()?);
        }
    }
    Ok(())
}
