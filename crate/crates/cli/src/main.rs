//! `pwolff`: potentials, solver runs, verification suites and level
//! iterations driven from one TOML config.
//!
//! Exit codes: 0 success, 1 a verification suite failed, 2 bad config or
//! input file, 3 the solver produced non-finite values, 4 any other
//! computation error.

mod commands;
mod config;
mod output;
mod suites;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pwolff_core::kmiter::KmError;
use pwolff_core::pde::PdeError;

use config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "pwolff", version, about = "Parabolic Wolff potentials and pointwise estimates")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for randomised suites and bumps; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Per-scale D_p table and P_p summaries at the query points.
    Potential,
    /// Run the solver and write snapshots plus a manifest.
    Solve,
    /// Run the property suites and write a JSON report.
    Verify,
    /// Run the level iteration and write its trace.
    Km,
}

#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Verify(Vec<String>),
    Unstable(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    /// Sorts a module error into the exit-code classes.
    pub fn classify(e: anyhow::Error) -> Self {
        for cause in e.chain() {
            if let Some(PdeError::NonFinite { .. }) = cause.downcast_ref::<PdeError>() {
                return Failure::Unstable(e);
            }
            if let Some(KmError::Pde(PdeError::NonFinite { .. })) = cause.downcast_ref::<KmError>() {
                return Failure::Unstable(e);
            }
            if let Some(KmError::BracketFailure { .. }) = cause.downcast_ref::<KmError>() {
                return Failure::Runtime(e);
            }
        }
        Failure::Input(e)
    }

    fn code(&self) -> u8 {
        match self {
            Failure::Verify(_) => 1,
            Failure::Input(_) => 2,
            Failure::Unstable(_) => 3,
            Failure::Runtime(_) => 4,
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path).map_err(Failure::Input)?,
        None if matches!(cli.command, Command::Verify) => RunConfig::default(),
        None => return Err(Failure::Input(anyhow::anyhow!("--config is required for this command"))),
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    let jobs = cli.jobs.or(cfg.jobs).unwrap_or(0);
    if jobs > 0 {
        // only fails if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let (artifacts, failing) = match cli.command {
        Command::Potential => (commands::potential(&cfg)?, Vec::new()),
        Command::Solve => (commands::solve_cmd(&cfg, seed)?, Vec::new()),
        Command::Km => (commands::km(&cfg)?, Vec::new()),
        Command::Verify => commands::verify(&cfg, seed)?,
    };
    let written = artifacts.commit(&cli.out).map_err(Failure::Runtime)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    if failing.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(failing))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Verify(names) => eprintln!("error: failing suites: {}", names.join(", ")),
                Failure::Input(e) | Failure::Unstable(e) | Failure::Runtime(e) => eprintln!("error: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}
