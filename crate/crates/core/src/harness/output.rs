//! CSV records and JSON summaries.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::runner::{RoundRecord, RunOutput};
use crate::error::{Error, Result};
use crate::policy::Tuning;

pub const CSV_HEADER: &str = "trial,round,policy,arm,reward,inst_regret,cum_regret,elapsed_ns";

/// 17 significant digits, enough to round-trip any `f64`.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(records: &[RoundRecord], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        if r.policy.contains([',', '"', '\n']) {
            return Err(Error::Config(format!("policy label `{}` cannot be written to CSV", r.policy)));
        }
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.trial,
            r.round,
            r.policy,
            r.arm,
            fmt_f64(r.reward),
            fmt_f64(r.inst_regret),
            fmt_f64(r.cum_regret),
            r.elapsed_ns
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_csv<R: BufRead>(input: R) -> Result<Vec<RoundRecord>> {
    let mut lines = input.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == CSV_HEADER => {}
        _ => return Err(Error::Parse("missing or unexpected CSV header".into())),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("CSV line {}: bad {what}", i + 2));
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 8 {
            return Err(bad("column count"));
        }
        let float = |s: &str, what: &str| s.parse::<f64>().map_err(|_| bad(what));
        out.push(RoundRecord {
            trial: cols[0].parse().map_err(|_| bad("trial"))?,
            round: cols[1].parse().map_err(|_| bad("round"))?,
            policy: cols[2].to_string(),
            arm: cols[3].parse().map_err(|_| bad("arm"))?,
            reward: float(cols[4], "reward")?,
            inst_regret: float(cols[5], "inst_regret")?,
            cum_regret: float(cols[6], "cum_regret")?,
            elapsed_ns: cols[7].parse().map_err(|_| bad("elapsed_ns"))?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    pub kind: String,
    pub mean_final_regret: f64,
    /// Sample standard deviation across trials (0 for a single trial).
    pub std_final_regret: f64,
    pub final_regrets: Vec<f64>,
    /// Mean total select+observe time per run, in seconds.
    pub mean_wall_time_s: f64,
    pub mean_ns_per_round: f64,
    /// Parameters used in the first trial.
    pub tuning: Tuning,
    pub fallbacks: usize,
    pub max_witness_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSummary {
    pub trial: usize,
    pub path_length: f64,
    pub changes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub setting: String,
    pub horizon: usize,
    pub dim: usize,
    pub n_arms: usize,
    pub n_trials: usize,
    pub base_seed: u64,
    pub policies: Vec<PolicySummary>,
    pub environments: Vec<EnvironmentSummary>,
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

pub fn summarize(cfg: &ExperimentConfig, run: &RunOutput) -> Summary {
    let policies = cfg
        .policies
        .iter()
        .map(|p| {
            let name = p.display_name();
            let mine: Vec<_> = run.outcomes.iter().filter(|o| o.policy == name).collect();
            let finals: Vec<f64> = mine.iter().map(|o| o.final_regret).collect();
            let (mean, std) = mean_std(&finals);
            let times: Vec<f64> = mine.iter().map(|o| o.elapsed_ns as f64).collect();
            let (mean_ns, _) = mean_std(&times);
            PolicySummary {
                policy: name,
                kind: p.kind.key().to_string(),
                mean_final_regret: mean,
                std_final_regret: std,
                final_regrets: finals,
                mean_wall_time_s: mean_ns * 1e-9,
                mean_ns_per_round: mean_ns / cfg.horizon as f64,
                tuning: mine.first().map(|o| o.tuning).unwrap_or_default(),
                fallbacks: mine.iter().map(|o| o.fallbacks).sum(),
                max_witness_violation: mine.iter().map(|o| o.max_witness_violation).fold(0.0, f64::max),
            }
        })
        .collect();
    Summary {
        setting: cfg.setting.to_string(),
        horizon: cfg.horizon,
        dim: cfg.dim,
        n_arms: cfg.n_arms,
        n_trials: cfg.n_trials,
        base_seed: cfg.base_seed,
        policies,
        environments: run
            .environments
            .iter()
            .map(|&(trial, path_length, changes)| EnvironmentSummary { trial, path_length, changes })
            .collect(),
    }
}

pub fn write_summary<W: Write>(summary: &Summary, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, summary).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

pub fn read_summary<R: std::io::Read>(input: R) -> Result<Summary> {
    serde_json::from_reader(input).map_err(|e| Error::Parse(e.to_string()))
}
