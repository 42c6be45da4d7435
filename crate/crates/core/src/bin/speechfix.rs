use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use speechfix::harness::{error_exit_code, run_command, worker_pool, CommandOutcome, RunConfig};
use speechfix::Result;

#[derive(Parser)]
#[command(name = "speechfix", version, about = "Speech degradation, restoration and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degrade a clean corpus and write a manifest
    Simulate(Common),
    /// Simulate a bank of room impulse responses
    RirGen(Common),
    /// Train the mask estimator
    Train(Common),
    /// Restore degraded audio
    Restore(Common),
    /// Score audio against clean references
    Evaluate(Common),
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output root
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cmd: Command) -> Result<CommandOutcome> {
    let (name, c) = match &cmd {
        Command::Simulate(c) => ("simulate", c),
        Command::RirGen(c) => ("rir-gen", c),
        Command::Train(c) => ("train", c),
        Command::Restore(c) => ("restore", c),
        Command::Evaluate(c) => ("evaluate", c),
    };
    let mut cfg = RunConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &c.out {
        cfg.output_dir = std::env::current_dir()?.join(out);
    }
    let workers = std::env::var("SPEECHFIX_WORKERS").ok();
    let pool = worker_pool(workers.as_deref())?;
    eprintln!("run {} -> {}", &cfg.hash()[..16], cfg.run_dir().display());
    pool.install(|| run_command(name, &cfg))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(outcome) => {
            for a in &outcome.artifacts {
                println!("{}", a.display());
            }
            for f in &outcome.failures {
                eprintln!("failed {}: {}", f.id, f.error);
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(error_exit_code(&e) as u8)
        }
    }
}
