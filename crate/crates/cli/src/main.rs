//! `tamed-em`: experiment runner for the tamed Euler–Maruyama library.
//!
//! Exit codes: 0 success, 2 invalid configuration or usage, 3 numerical
//! failure or a failed verifier, 1 I/O errors. Nothing is written unless the
//! run succeeds.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use tamed_em_core::Workers;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) | CliError::Verification(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "tamed-em", version, about = "Tamed Euler-Maruyama experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Override a configuration key, e.g. `--set rate.paths=500`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed; overrides `master_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on this.
    #[arg(long, env = "TAMED_EM_WORKERS")]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths of the scheme at `scheme.n`.
    Simulate(Common),
    /// Strong-error table and rate fit.
    Rate(Common),
    /// Multilevel Monte Carlo estimate of `E g(X_1)`.
    Mlmc(Common),
    /// Stochastic transport equation errors.
    Transport(Common),
    /// Zvonkin PDE diagnostic for the tamed drift.
    Zvonkin(Common),
    /// Estimate of the drift-difference functional along reference paths.
    Varpi(Common),
    /// Khasminskii exponential-moment check.
    Khasminskii(Common),
    /// Deterministic verifier suite.
    Validate(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Simulate(c) => ("simulate", c),
            Command::Rate(c) => ("rate", c),
            Command::Mlmc(c) => ("mlmc", c),
            Command::Transport(c) => ("transport", c),
            Command::Zvonkin(c) => ("zvonkin", c),
            Command::Varpi(c) => ("varpi", c),
            Command::Khasminskii(c) => ("khasminskii", c),
            Command::Validate(c) => ("validate", c),
        }
    }
}

fn run(cli: Cli) -> Result<PathBuf, CliError> {
    let start = Instant::now();
    let (name, common) = cli.command.parts();
    let loaded = config::load(&common.config, &common.overrides, common.seed)?;
    let cfg = &loaded.config;
    let workers = common.workers.or(cfg.worker_count).unwrap_or(1);
    if workers == 0 {
        return Err(CliError::Config("worker count must be at least 1".into()));
    }
    let pool = Workers(workers);
    let artifacts = match name {
        "simulate" => commands::simulate(cfg, pool)?,
        "rate" => commands::rate(cfg, pool)?,
        "mlmc" => commands::mlmc(cfg, pool)?,
        "transport" => commands::transport(cfg, pool)?,
        "zvonkin" => commands::zvonkin(cfg)?,
        "varpi" => commands::varpi(cfg, pool)?,
        "khasminskii" => commands::khasminskii(cfg, pool)?,
        "validate" => {
            let (artifacts, checks) = commands::validate(cfg)?;
            let failed: Vec<String> = checks
                .iter()
                .filter(|c| !c.pass)
                .map(|c| format!("{} ({})", c.name, c.detail))
                .collect();
            if !failed.is_empty() {
                return Err(CliError::Verification(failed.join("; ")));
            }
            artifacts
        }
        _ => unreachable!("subcommand names are fixed"),
    };
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("tamed-em-out").join(name));
    let info = output::RunInfo {
        subcommand: name,
        canonical_config: &loaded.canonical,
        config_sha256: &loaded.sha256,
        master_seed: cfg.master_seed,
        workers,
        wall_time_seconds: start.elapsed().as_secs_f64(),
    };
    output::write_all(&dir, &artifacts, &info)?;
    Ok(dir)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(dir) => {
            println!("artifacts written to {}", dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("tamed-em: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
