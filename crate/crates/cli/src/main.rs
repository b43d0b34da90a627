use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use itolift_core::config::{parse_config, ExperimentConfig};
use itolift_core::exec;
use itolift_core::experiments::run_experiment;
use itolift_core::symbols::BUILTIN_SYMBOLS;

/// Ito transform experiments on periodic grids.
#[derive(Parser)]
#[command(name = "itolift", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment in a config file, writing a CSV table and a manifest.
    Run {
        config: PathBuf,
        /// Directory for the CSV and manifest (default: output.path as given).
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the config's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Parse and validate a config, printing the fully resolved form.
    Check {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// List the built-in symbol families.
    ListSymbols,
}

fn load(path: &PathBuf, seed: Option<u64>) -> Result<ExperimentConfig, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut config = parse_config(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    if let Some(s) = seed {
        config.seed = s;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<bool, String> {
    match cli.command {
        Command::Run {
            config,
            output_dir,
            seed,
            jobs,
        } => {
            if let Some(n) = jobs {
                exec::configure_threads(n)?;
            }
            let config = load(&config, seed)?;
            let report = run_experiment(&config, output_dir.as_deref()).map_err(|e| e.to_string())?;
            println!("wrote {}", report.csv_path.display());
            println!("wrote {}", report.manifest_path.display());
            let failed = report.outcome.failed_checks();
            for c in &failed {
                eprintln!("check failed: {}: {:e} (limit {:e})", c.name, c.value, c.limit);
            }
            println!(
                "{} of {} checks passed",
                report.outcome.checks.len() - failed.len(),
                report.outcome.checks.len()
            );
            Ok(failed.is_empty())
        }
        Command::Check { config, seed } => {
            let config = load(&config, seed)?;
            print!("{}", config.serialize());
            Ok(true)
        }
        Command::ListSymbols => {
            for (name, description) in BUILTIN_SYMBOLS {
                println!("{name:<16} {description}");
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
