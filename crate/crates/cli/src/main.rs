mod config;
mod error;
mod plotdata;
mod presets;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::error::CliError;
use crate::run::{RunOptions, OUTPUT_ENV};

#[derive(Parser)]
#[command(name = "weakdep", version, about = "Run weak-dependence and Berry-Esseen rate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config (a JSON file, or `preset:NAME`).
    Run {
        config: String,
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory; the experiment writes into a subdirectory named after it.
        #[arg(long, env = OUTPUT_ENV)]
        out: Option<PathBuf>,
        /// Override the master seed of the config.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Built-in experiment configs.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
    /// Parse and check a config without running it.
    Validate { config: String },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    /// Print a preset as a config document.
    Show { name: String },
}

fn load(source: &str) -> Result<config::ExperimentConfig, CliError> {
    if let Some(name) = source.strip_prefix("preset:") {
        return presets::find(name).map(|p| p.config()).ok_or_else(|| CliError::Precondition {
            field: "config".into(),
            message: format!("unknown preset {name}"),
        });
    }
    let text = std::fs::read_to_string(source).map_err(|e| CliError::Parse {
        message: format!("cannot read {source}: {e}"),
        line: 0,
        column: 0,
    })?;
    config::parse(&text)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            config,
            threads,
            out,
            seed,
        } => {
            let cfg = load(&config)?;
            let opts = RunOptions { threads, out, seed };
            let (manifest, dir) = run::run(cfg, &opts)?;
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            println!("{} outputs written to {}", manifest.outputs.len(), dir.display());
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for p in &presets::PRESETS {
                    println!("{:<24} {}", p.name, p.summary);
                }
            }
            PresetAction::Show { name } => {
                let cfg = load(&format!("preset:{name}"))?;
                println!("{}", serde_json::to_string_pretty(&cfg)?);
            }
        },
        Command::Validate { config } => {
            let cfg = load(&config)?;
            let model = config::validate(&cfg)?;
            println!("ok: {} ({} on {})", cfg.name, cfg.task.name(), model.describe());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.record());
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
