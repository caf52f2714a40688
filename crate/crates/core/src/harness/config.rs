//! Experiment configuration, read from TOML.
//!
//! ```toml
//! setting = "LB"
//! T = 6000
//! d = 2
//! n_arms = 50
//! n_trials = 20
//! base_seed = 1
//!
//! [environment]
//! kind = "rotating"
//!
//! [[policy]]
//! kind = "lb_weight"
//!
//! [[policy]]
//! kind = "sw_linucb"
//! window = 34
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::confidence::Setting;
use crate::env::RewardModel;
use crate::error::{Error, Result};
use crate::policy::{PolicyConfig, PolicyKind, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvironmentKind {
    #[default]
    Rotating,
    Piecewise,
    Stationary,
    /// Trajectory (and optionally arms) replayed from text files.
    File,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    #[serde(default)]
    pub kind: EnvironmentKind,
    /// Number of change points for `piecewise`.
    #[serde(default)]
    pub changes: usize,
    /// Draw a fresh arm set every round instead of fixing it for the run.
    #[serde(default)]
    pub resample_arms: bool,
    #[serde(default)]
    pub trajectory_file: Option<PathBuf>,
    #[serde(default)]
    pub arms_file: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_csv")]
    pub csv: String,
    #[serde(default = "default_summary")]
    pub summary: String,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_csv() -> String {
    "records.csv".into()
}

fn default_summary() -> String {
    "summary.json".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: default_out_dir(), csv: default_csv(), summary: default_summary() }
    }
}

impl OutputConfig {
    pub fn csv_path(&self) -> PathBuf {
        self.dir.join(&self.csv)
    }

    pub fn summary_path(&self) -> PathBuf {
        self.dir.join(&self.summary)
    }
}

fn one() -> f64 {
    1.0
}

fn default_arms() -> usize {
    50
}

fn default_trials() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub setting: Setting,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(rename = "d")]
    pub dim: usize,
    #[serde(default = "default_arms")]
    pub n_arms: usize,
    #[serde(default = "default_trials")]
    pub n_trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(rename = "S", default = "one")]
    pub s: f64,
    #[serde(rename = "L", default = "one")]
    pub l: f64,
    /// Noise level; defaults to 1 for Gaussian rewards and 1/2 for Bernoulli.
    #[serde(rename = "R", default)]
    pub r: Option<f64>,
    #[serde(default = "one")]
    pub m: f64,
    /// Confidence level; defaults to `1/T`.
    #[serde(default)]
    pub delta: Option<f64>,
    /// When false every `elapsed_ns` is written as 0 so outputs are
    /// byte-reproducible.
    #[serde(default = "yes")]
    pub record_timing: bool,
    #[serde(default)]
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(rename = "policy", default)]
    pub policies: Vec<PolicyConfig>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config; relative data-file paths resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for file in [&mut cfg.environment.trajectory_file, &mut cfg.environment.arms_file]
            .into_iter()
            .flatten()
        {
            if file.is_relative() {
                *file = base.join(&*file);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn noise(&self) -> f64 {
        self.r.unwrap_or(match self.setting {
            Setting::Lb => 1.0,
            _ => 0.5,
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta.unwrap_or(1.0 / self.horizon as f64)
    }

    pub fn reward_model(&self) -> RewardModel {
        match self.setting {
            Setting::Lb => RewardModel::LinearGaussian { noise_std: self.noise() },
            _ => RewardModel::BernoulliLogistic,
        }
    }

    /// Tuning inputs for a given environment realization.
    pub fn problem(&self, path_length: f64, changes: usize) -> Problem {
        Problem {
            setting: self.setting,
            d: self.dim,
            horizon: self.horizon,
            s: self.s,
            l: self.l,
            r: self.noise(),
            m: self.m,
            delta: self.delta(),
            path_length,
            changes,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_trials == 0 {
            return fail("n_trials must be at least 1".into());
        }
        if self.horizon < 2 {
            return fail("T must be at least 2".into());
        }
        if self.dim == 0 || self.n_arms == 0 {
            return fail("d and n_arms must be positive".into());
        }
        for (name, v) in [("S", self.s), ("L", self.l), ("m", self.m), ("R", self.noise())] {
            if !(v.is_finite() && v >= 0.0) || (v == 0.0 && matches!(name, "S" | "L")) {
                return fail(format!("{name} must be positive, got {v}"));
            }
        }
        if let Some(d) = self.delta {
            if !(d > 0.0 && d < 1.0) {
                return fail(format!("delta must lie in (0, 1), got {d}"));
            }
        }
        match self.environment.kind {
            EnvironmentKind::Rotating if self.dim < 2 => return fail("rotating environment needs d ≥ 2".into()),
            EnvironmentKind::Piecewise if self.environment.changes >= self.horizon => {
                return fail("piecewise environment needs changes < T".into())
            }
            EnvironmentKind::File if self.environment.trajectory_file.is_none() => {
                return fail("file environment needs trajectory_file".into())
            }
            _ => {}
        }
        if self.policies.is_empty() {
            return fail("at least one [[policy]] entry is required".into());
        }
        let mut names = HashSet::new();
        for p in &self.policies {
            if p.kind.is_linear() && self.setting != Setting::Lb {
                return fail(format!("{} needs linear rewards but the setting is {}", p.kind, self.setting));
            }
            if p.kind == PolicyKind::FixedArm && p.arm.unwrap_or(0) >= self.n_arms {
                return fail(format!("fixed arm index outside 0..{}", self.n_arms));
            }
            if !names.insert(p.display_name()) {
                return fail(format!("duplicate policy label `{}`; set `label`", p.display_name()));
            }
        }
        Ok(())
    }
}
