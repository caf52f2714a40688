//! Wall-time comparison of the linear policies on the rotating environment.

use serde::Serialize;

use super::config::{EnvironmentConfig, EnvironmentKind, ExperimentConfig, OutputConfig};
use super::runner::{build_environment, run_trial};
use crate::confidence::Setting;
use crate::error::Result;
use crate::policy::{PolicyConfig, PolicyKind};

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub policy: String,
    pub mean_ns_per_round: f64,
    pub mean_final_regret: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    /// D-LinUCB time divided by LB-WeightUCB time.
    pub ratio: f64,
}

pub fn bench_config(horizon: usize, dim: usize, n_arms: usize, trials: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        setting: Setting::Lb,
        horizon,
        dim,
        n_arms,
        n_trials: trials,
        base_seed: seed,
        s: 1.0,
        l: 1.0,
        r: Some(1.0),
        m: 1.0,
        delta: None,
        record_timing: true,
        environment: EnvironmentConfig { kind: EnvironmentKind::Rotating, ..EnvironmentConfig::default() },
        output: OutputConfig::default(),
        policies: [
            PolicyKind::LbWeight,
            PolicyKind::DLinucb,
            PolicyKind::Oful,
            PolicyKind::SwLinucb,
            PolicyKind::RestartLinucb,
        ]
        .into_iter()
        .map(PolicyConfig::new)
        .collect(),
    }
}

/// Runs trials one after another on the calling thread so timings are
/// comparable across policies.
pub fn run_bench(cfg: &ExperimentConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let n = cfg.policies.len();
    let mut ns = vec![0.0; n];
    let mut regret = vec![0.0; n];
    for trial in 0..cfg.n_trials {
        let env = build_environment(cfg, trial)?;
        let (_, outcomes) = run_trial(cfg, &env)?;
        for (k, o) in outcomes.iter().enumerate() {
            ns[k] += o.elapsed_ns as f64;
            regret[k] += o.final_regret;
        }
    }
    let per_round = cfg.n_trials as f64 * cfg.horizon as f64;
    let rows: Vec<BenchRow> = cfg
        .policies
        .iter()
        .enumerate()
        .map(|(k, p)| BenchRow {
            policy: p.display_name(),
            mean_ns_per_round: ns[k] / per_round,
            mean_final_regret: regret[k] / cfg.n_trials as f64,
        })
        .collect();
    let time_of = |kind: PolicyKind| {
        cfg.policies.iter().position(|p| p.kind == kind).map(|k| rows[k].mean_ns_per_round)
    };
    let ratio = match (time_of(PolicyKind::DLinucb), time_of(PolicyKind::LbWeight)) {
        (Some(d), Some(l)) if l > 0.0 => d / l,
        _ => f64::NAN,
    };
    Ok(BenchReport { rows, ratio })
}

impl std::fmt::Display for BenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<16} {:>14} {:>14}", "policy", "ns/round", "final regret")?;
        for r in &self.rows {
            writeln!(f, "{:<16} {:>14.1} {:>14.3}", r.policy, r.mean_ns_per_round, r.mean_final_regret)?;
        }
        write!(f, "D-LinUCB / LB-WeightUCB time ratio: {:.3}", self.ratio)
    }
}
