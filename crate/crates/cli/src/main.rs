//! `sctperc`: exact constants, simulations and estimator tables for oriented
//! percolation on supercritical causal triangulations.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use commands::{Env, Status};
use config::{Command, ExperimentConfig};

/// Bad input from the user; exits with code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Parser, Debug)]
#[command(name = "sctperc", version = output::BUILD_ID, about)]
struct Cli {
    /// pc, simulate or analyze.
    #[arg(value_enum)]
    command: Command,
    /// JSON experiment config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for result files.
    #[arg(long, env = "SCTPERC_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    experiment: ExperimentConfig,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(Status::Complete) => ExitCode::SUCCESS,
        Ok(Status::Partial) => {
            eprintln!("some samples stopped at a budget; partial results were written");
            ExitCode::from(3)
        }
        Err(e) if e.downcast_ref::<UsageError>().is_some() => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(4)
        }
    }
}

fn execute(cli: Cli) -> anyhow::Result<Status> {
    if cli.threads == Some(0) {
        return Err(UsageError("--threads must be positive".into()).into());
    }
    let mut flags = cli.experiment;
    flags.command = Some(cli.command);
    let cfg = match &cli.config {
        Some(path) => {
            let file = ExperimentConfig::load(path)?;
            if file.command.is_some_and(|c| c != cli.command) {
                return Err(UsageError(format!(
                    "config {} is for another command",
                    path.display()
                ))
                .into());
            }
            flags.over(file)
        }
        None => flags,
    };
    let env = Env {
        out_dir: cli.out_dir,
        threads: cli.threads,
    };
    let start = std::time::Instant::now();
    let status = commands::run(cfg, &env)?;
    eprintln!("done in {:.2}s", start.elapsed().as_secs_f64());
    Ok(status)
}
