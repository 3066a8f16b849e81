//! Batch front end: `resolvent-lab run <config> --out <dir>`.
//!
//! Exit status is 0 when every check passes, 1 when any check fails or is
//! inconclusive, 2 on configuration or I/O errors.

pub mod config;
pub mod experiments;
pub mod report;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig, Family};
pub use experiments::FamilyOutcome;
pub use report::{emit_csv, emit_svg, Cell, Series, Table};

use crate::verifier::Verdict;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const WORKERS_ENV: &str = "RESOLVENT_LAB_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "resolvent-lab", version, about = "Weighted resolvent and wave decay experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run every experiment section of a config file.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = WORKERS_ENV, default_value_t = 1)]
        workers: usize,
        /// Overrides `numerics.slack`.
        #[arg(long)]
        slack: Option<f64>,
    },
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Experiment(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub families: Vec<FamilyOutcome>,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.families.iter().all(|f| f.overall() == Verdict::Pass) {
            EXIT_PASS
        } else {
            EXIT_FAIL
        }
    }
}

/// Loads the config, runs each family on a pool of `workers` threads and
/// writes `<family>.csv` (plus charts) into `out`.
pub fn run(config: &Path, out: &Path, workers: usize, slack: Option<f64>) -> Result<RunOutcome, CliError> {
    let mut cfg = ExperimentConfig::load(config)?;
    if let Some(s) = slack {
        if !(s >= 0.0) {
            return Err(ConfigError::Invalid(format!("slack must be nonnegative (got {s})")).into());
        }
        cfg.numerics.slack = s;
    }
    fs::create_dir_all(out).map_err(|source| CliError::Write {
        path: out.to_path_buf(),
        source,
    })?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Pool(e.to_string()))?;
    let mut families = Vec::new();
    for family in &cfg.families {
        let outcome = pool
            .install(|| experiments::run_family(&cfg, family))
            .map_err(CliError::Experiment)?;
        write_outcome(&outcome, out)?;
        families.push(outcome);
    }
    Ok(RunOutcome { families })
}

fn write_outcome(outcome: &FamilyOutcome, out: &Path) -> Result<(), CliError> {
    let wrap = |path: PathBuf| move |source| CliError::Write { path, source };
    let csv_path = out.join(format!("{}.csv", outcome.name));
    emit_csv(&outcome.table, &csv_path).map_err(wrap(csv_path.clone()))?;
    for (name, series) in &outcome.charts {
        let path = out.join(name);
        emit_svg(series, &path).map_err(wrap(path.clone()))?;
    }
    Ok(())
}

/// Parses `args`, runs, prints one summary line per family and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
        }
    };
    match cli.command {
        Command::Run {
            config,
            out,
            workers,
            slack,
        } => match run(&config, &out, workers, slack) {
            Ok(outcome) => {
                for f in &outcome.families {
                    println!("{}", f.summary());
                }
                outcome.exit_code()
            }
            Err(e) => {
                eprintln!("error: {e}");
                EXIT_CONFIG
            }
        },
    }
}
