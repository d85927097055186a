use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use hypertune_cli::{cmd_compare, cmd_replay, cmd_run, Overrides};

/// Asynchronous multi-fidelity hyper-parameter tuning.
///
/// Set HYPERTUNE_LOG (e.g. `info`, `debug`) for log output.
#[derive(Parser)]
#[command(name = "hypertune", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scheduler for every seed.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run several scheduler variants and write aligned anytime curves.
    Compare {
        config: PathBuf,
        /// Variants to compare: dasha, asha, sha, hyperband, random.
        #[arg(required = true)]
        variants: Vec<String>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Validate a trajectory file and print summary statistics.
    Replay { trajectory: PathBuf },
}

#[derive(Args)]
struct OverrideArgs {
    /// Run only this seed.
    #[arg(long)]
    seed_override: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    budget_seconds: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            seed: a.seed_override,
            workers: a.workers,
            budget_seconds: a.budget_seconds,
            out: a.out,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("HYPERTUNE_LOG", "warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, overrides } => cmd_run(&config, &overrides.into()).map(drop),
        Command::Compare {
            config,
            variants,
            overrides,
        } => cmd_compare(&config, &variants, &overrides.into()).map(drop),
        Command::Replay { trajectory } => cmd_replay(&trajectory).map(drop),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
