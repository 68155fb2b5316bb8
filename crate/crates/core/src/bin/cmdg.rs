//! Command-line experiment runner.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cmdg::data::io::write_dataset;
use cmdg::experiment::{
    compare, exit_code, run_experiment, threads_from_env, ExperimentConfig, Summary,
};

#[derive(Parser)]
#[command(version, about = "Domain generalization via object matching", long_about = None)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every run of an experiment for every seed and write reports.
    Run {
        config: PathBuf,
        /// Validate and print the resolved configuration without training.
        #[arg(long)]
        dry_run: bool,
        /// Override a config field, e.g. `--set train.epochs=5`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Tabulate two or more `summary.json` files.
    Compare {
        #[arg(required = true, num_args = 2..)]
        summaries: Vec<PathBuf>,
        #[arg(long)]
        csv: bool,
    },
    /// Generate an experiment's dataset (first seed) into a directory.
    GenData {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            dry_run,
            overrides,
        } => ExperimentConfig::load(&config, &overrides).and_then(|cfg| {
            if dry_run {
                println!("{}", cfg.describe()?);
                return Ok(());
            }
            let (_, summary) = run_experiment(&cfg, threads_from_env())?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
            Ok(())
        }),
        Command::Compare { summaries, csv } => summaries
            .iter()
            .map(|p| Ok((p.display().to_string(), Summary::read(p)?)))
            .collect::<cmdg::Result<Vec<_>>>()
            .and_then(|s| compare(&s, csv))
            .map(|table| print!("{table}")),
        Command::GenData {
            config,
            out,
            overrides,
        } => ExperimentConfig::load(&config, &overrides)
            .and_then(|cfg| write_dataset(&cfg.dataset.build(cfg.seeds[0])?, &out)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
