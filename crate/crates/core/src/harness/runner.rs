//! Seeded multi-trial simulation loop.

use std::fs::File;
use std::io::BufReader;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{EnvironmentKind, ExperimentConfig};
use crate::env::{
    change_count, draw_reward, instantaneous_regret, path_length, piecewise_trajectory,
    rotating_trajectory, sample_arms_with, substream, ArmSet, Trajectory,
};
use crate::error::{Error, Result};
use crate::policy::{build_policy, Tuning};

/// Random stream indices within a trial seed.
pub const STREAM_ARMS: u64 = 0;
pub const STREAM_TRAJECTORY: u64 = 1;
pub const STREAM_RESAMPLE: u64 = 2;
/// Rewards of policy `k` use stream `STREAM_REWARDS + k`.
pub const STREAM_REWARDS: u64 = 100;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "NSBANDIT_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub trial: usize,
    pub round: usize,
    pub policy: String,
    pub arm: usize,
    pub reward: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
    pub elapsed_ns: u64,
}

/// One realization of the environment, shared by every policy of a trial.
#[derive(Debug, Clone)]
pub struct TrialEnvironment {
    pub trial: usize,
    pub seed: u64,
    pub trajectory: Trajectory,
    /// A single arm set, or one per round when resampling is enabled.
    pub arm_sets: Vec<ArmSet>,
    pub path_length: f64,
    pub changes: usize,
}

impl TrialEnvironment {
    /// Arms offered at 1-based round `t`.
    pub fn arms_at(&self, t: usize) -> &ArmSet {
        if self.arm_sets.len() == 1 {
            &self.arm_sets[0]
        } else {
            &self.arm_sets[t - 1]
        }
    }
}

/// Per-policy statistics of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub trial: usize,
    pub policy: String,
    pub final_regret: f64,
    pub elapsed_ns: u64,
    pub tuning: Tuning,
    pub fallbacks: usize,
    pub max_witness_violation: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<RoundRecord>,
    pub outcomes: Vec<TrialOutcome>,
    pub environments: Vec<(usize, f64, usize)>,
}

pub fn trial_seed(cfg: &ExperimentConfig, trial: usize) -> u64 {
    cfg.base_seed.wrapping_add(trial as u64)
}

fn read_file<T>(path: &std::path::Path, parse: impl Fn(BufReader<File>) -> Result<T>) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?;
    parse(BufReader::new(file))
}

pub fn build_environment(cfg: &ExperimentConfig, trial: usize) -> Result<TrialEnvironment> {
    let seed = trial_seed(cfg, trial);
    let env = &cfg.environment;
    let traj_seed = {
        use rand::RngCore;
        substream(seed, STREAM_TRAJECTORY).next_u64()
    };
    let trajectory = match env.kind {
        EnvironmentKind::Rotating => rotating_trajectory(cfg.dim, cfg.horizon, cfg.s)?,
        EnvironmentKind::Piecewise => piecewise_trajectory(cfg.dim, cfg.horizon, env.changes, cfg.s, traj_seed)?,
        EnvironmentKind::Stationary => piecewise_trajectory(cfg.dim, cfg.horizon, 0, cfg.s, traj_seed)?,
        EnvironmentKind::File => {
            let path = env.trajectory_file.as_ref().expect("validated");
            let t = read_file(path, Trajectory::read_text)?;
            if t.horizon() != cfg.horizon || t.dim() != cfg.dim {
                return Err(Error::Config(format!(
                    "trajectory file has {}×{}, config expects {}×{}",
                    t.horizon(),
                    t.dim(),
                    cfg.horizon,
                    cfg.dim
                )));
            }
            t
        }
    };
    if trajectory.max_norm() > cfg.s * (1.0 + 1e-12) {
        return Err(Error::Config(format!("trajectory exceeds S = {}", cfg.s)));
    }
    let arm_sets = if let Some(path) = &env.arms_file {
        let arms = read_file(path, ArmSet::read_text)?;
        if arms.dim() != cfg.dim || arms.bound() > cfg.l * (1.0 + 1e-12) {
            return Err(Error::Config("arm file does not match d or exceeds L".into()));
        }
        vec![arms]
    } else if env.resample_arms {
        let mut rng = substream(seed, STREAM_RESAMPLE);
        (0..cfg.horizon).map(|_| sample_arms_with(cfg.n_arms, cfg.dim, cfg.l, &mut rng)).collect::<Result<_>>()?
    } else {
        let mut rng = substream(seed, STREAM_ARMS);
        vec![sample_arms_with(cfg.n_arms, cfg.dim, cfg.l, &mut rng)?]
    };
    Ok(TrialEnvironment {
        trial,
        seed,
        path_length: path_length(&trajectory),
        changes: change_count(&trajectory),
        trajectory,
        arm_sets,
    })
}

/// Runs every policy of the config on one environment realization.
pub fn run_trial(cfg: &ExperimentConfig, env: &TrialEnvironment) -> Result<(Vec<RoundRecord>, Vec<TrialOutcome>)> {
    let model = cfg.reward_model();
    let problem = cfg.problem(env.path_length, env.changes);
    let mut records = Vec::with_capacity(cfg.horizon * cfg.policies.len());
    let mut outcomes = Vec::with_capacity(cfg.policies.len());
    for (k, pcfg) in cfg.policies.iter().enumerate() {
        let name = pcfg.display_name();
        let (mut policy, tuning) = build_policy(pcfg, &problem)?;
        let mut rng = substream(env.seed, STREAM_REWARDS + k as u64);
        let mut cum = 0.0;
        let mut total_ns = 0u64;
        let mut fallbacks = 0;
        let mut max_violation = 0.0f64;
        for t in 1..=cfg.horizon {
            let arms = env.arms_at(t);
            let theta = env.trajectory.at(t);
            let start = Instant::now();
            let sel = policy.select(arms)?;
            let select_ns = start.elapsed().as_nanos() as u64;
            if sel.arm >= arms.len() {
                return Err(Error::InvalidParameter(format!("{name} chose arm {} of {}", sel.arm, arms.len())));
            }
            if let Some(w) = &sel.witness {
                max_violation = max_violation.max(policy.witness_violation(w)?);
            }
            fallbacks += sel.fallback as usize;
            let x = arms.get(sel.arm);
            let reward = draw_reward(&model, x, theta, &mut rng);
            let inst = instantaneous_regret(&model, arms, theta, sel.arm);
            cum += inst;
            let start = Instant::now();
            policy.observe(x, reward)?;
            let observe_ns = start.elapsed().as_nanos() as u64;
            let elapsed_ns = if cfg.record_timing { select_ns + observe_ns } else { 0 };
            total_ns += elapsed_ns;
            records.push(RoundRecord {
                trial: env.trial,
                round: t,
                policy: name.clone(),
                arm: sel.arm,
                reward,
                inst_regret: inst,
                cum_regret: cum,
                elapsed_ns,
            });
        }
        outcomes.push(TrialOutcome {
            trial: env.trial,
            policy: name,
            final_regret: cum,
            elapsed_ns: total_ns,
            tuning,
            fallbacks,
            max_witness_violation: max_violation,
        });
    }
    Ok((records, outcomes))
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs all trials (in parallel) and returns records ordered by
/// `(trial, policy, round)`, policies in config order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count())
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_trial: Vec<Result<_>> = pool.install(|| {
        (0..cfg.n_trials)
            .into_par_iter()
            .map(|trial| {
                let env = build_environment(cfg, trial)?;
                let (records, outcomes) = run_trial(cfg, &env)?;
                Ok((records, outcomes, (trial, env.path_length, env.changes)))
            })
            .collect()
    });
    let mut out = RunOutput { records: Vec::new(), outcomes: Vec::new(), environments: Vec::new() };
    for result in per_trial {
        let (records, outcomes, env) = result?;
        out.records.extend(records);
        out.outcomes.extend(outcomes);
        out.environments.push(env);
    }
    Ok(out)
}
