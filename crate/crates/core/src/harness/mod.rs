//! Experiment orchestration: configuration, seeded runs, outputs, benchmarks
//! and the built-in invariant checks.

pub mod bench;
pub mod config;
pub mod output;
pub mod runner;
pub mod verify;

use std::fs::{self, File};
use std::io::BufWriter;

pub use config::{EnvironmentConfig, EnvironmentKind, ExperimentConfig, OutputConfig};
pub use output::{read_csv, read_summary, summarize, write_csv, write_summary, Summary, CSV_HEADER};
pub use runner::{build_environment, run_experiment, run_trial, RoundRecord, RunOutput, TrialEnvironment};

use crate::error::Result;

/// Runs `cfg` and writes the CSV and JSON summary into its output directory.
pub fn run_to_files(cfg: &ExperimentConfig) -> Result<Summary> {
    let run = run_experiment(cfg)?;
    let summary = summarize(cfg, &run);
    fs::create_dir_all(&cfg.output.dir)?;
    write_csv(&run.records, BufWriter::new(File::create(cfg.output.csv_path())?))?;
    write_summary(&summary, BufWriter::new(File::create(cfg.output.summary_path())?))?;
    Ok(summary)
}
