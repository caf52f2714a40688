//! Bandit policies behind a common select/observe contract.

mod build;
mod glm;
mod linear;
mod restart;
mod scb_pw;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::env::ArmSet;
use crate::error::{Error, Result};

pub use build::{build_policy, make_baseline, PolicyConfig, Problem, Tuning};
pub use glm::{GlmUcb, GlmVariant};
pub use linear::{LinUcb, SwLinUcb};
pub use restart::{FixedArm, Restart};
pub use scb_pw::ScbPwUcb;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    LbWeight,
    DLinucb,
    Oful,
    SwLinucb,
    RestartLinucb,
    GlbWeight,
    GlmUcb,
    RestartGlm,
    ScbWeight,
    ScbUcb,
    RestartScb,
    ScbPwWeight,
    FixedArm,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 13] = [
        PolicyKind::LbWeight,
        PolicyKind::DLinucb,
        PolicyKind::Oful,
        PolicyKind::SwLinucb,
        PolicyKind::RestartLinucb,
        PolicyKind::GlbWeight,
        PolicyKind::GlmUcb,
        PolicyKind::RestartGlm,
        PolicyKind::ScbWeight,
        PolicyKind::ScbUcb,
        PolicyKind::RestartScb,
        PolicyKind::ScbPwWeight,
        PolicyKind::FixedArm,
    ];

    /// Identifier used in configs.
    pub fn key(&self) -> &'static str {
        match self {
            PolicyKind::LbWeight => "lb_weight",
            PolicyKind::DLinucb => "d_linucb",
            PolicyKind::Oful => "oful",
            PolicyKind::SwLinucb => "sw_linucb",
            PolicyKind::RestartLinucb => "restart_linucb",
            PolicyKind::GlbWeight => "glb_weight",
            PolicyKind::GlmUcb => "glm_ucb",
            PolicyKind::RestartGlm => "restart_glm",
            PolicyKind::ScbWeight => "scb_weight",
            PolicyKind::ScbUcb => "scb_ucb",
            PolicyKind::RestartScb => "restart_scb",
            PolicyKind::ScbPwWeight => "scb_pw_weight",
            PolicyKind::FixedArm => "fixed_arm",
        }
    }

    /// Display name used in outputs.
    pub fn label(&self) -> &'static str {
        match self {
            PolicyKind::LbWeight => "LB-WeightUCB",
            PolicyKind::DLinucb => "D-LinUCB",
            PolicyKind::Oful => "OFUL",
            PolicyKind::SwLinucb => "SW-LinUCB",
            PolicyKind::RestartLinucb => "Restart-LinUCB",
            PolicyKind::GlbWeight => "GLB-WeightUCB",
            PolicyKind::GlmUcb => "GLM-UCB",
            PolicyKind::RestartGlm => "Restart-GLM",
            PolicyKind::ScbWeight => "SCB-WeightUCB",
            PolicyKind::ScbUcb => "SCB-UCB",
            PolicyKind::RestartScb => "Restart-SCB",
            PolicyKind::ScbPwWeight => "SCB-PW-WeightUCB",
            PolicyKind::FixedArm => "FixedArm",
        }
    }

    /// Policies that assume a linear-Gaussian reward model.
    pub fn is_linear(&self) -> bool {
        matches!(
            self,
            PolicyKind::LbWeight
                | PolicyKind::DLinucb
                | PolicyKind::Oful
                | PolicyKind::SwLinucb
                | PolicyKind::RestartLinucb
        )
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.key() == norm || k.label().to_ascii_lowercase().replace('-', "_") == norm)
            .ok_or_else(|| Error::Config(format!("unknown policy `{s}`")))
    }
}

/// Outcome of a selection step.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub arm: usize,
    /// Parameter attaining the optimistic value, for parameter-based rules.
    pub witness: Option<DVector<f64>>,
    /// Set when a parameter-based rule had to use its bonus-form fallback.
    pub fallback: bool,
}

impl Selection {
    pub fn arm(arm: usize) -> Self {
        Self { arm, witness: None, fallback: false }
    }
}

pub trait Policy: Send {
    fn kind(&self) -> PolicyKind;

    /// Chooses an arm. Depends only on the policy state and `arms`.
    fn select(&self, arms: &ArmSet) -> Result<Selection>;

    /// Feeds back the reward `r` of the played arm `x`.
    fn observe(&mut self, x: &[f64], r: f64) -> Result<()>;

    /// Number of observations received.
    fn round(&self) -> usize;

    /// Current point estimate, if the policy keeps one.
    fn estimate(&self) -> Option<DVector<f64>> {
        None
    }

    /// How far a returned witness is outside its feasible set, relative to
    /// the confidence radius. Zero for policies without witnesses.
    fn witness_violation(&self, _witness: &DVector<f64>) -> Result<f64> {
        Ok(0.0)
    }

    fn box_clone(&self) -> Box<dyn Policy>;
}

impl Clone for Box<dyn Policy> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Index of the largest value; ties go to the lowest index and NaN never wins.
pub fn argmax<I: IntoIterator<Item = f64>>(values: I) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        if v.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i).ok_or(Error::EmptyArmSet)
}
