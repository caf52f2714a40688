use serde::{Deserialize, Serialize};

use super::{FixedArm, GlmUcb, LinUcb, Policy, PolicyKind, Restart, ScbPwUcb, SwLinUcb};
use crate::confidence::{
    default_lambda, default_lookback, rho_pw, tune_gamma, tune_window_restart, RadiusParams, Setting,
};
use crate::error::{Error, Result};
use crate::glm::{link_constants, GlmConstants, Link};

/// One policy entry of an experiment, with optional overrides of the tuned
/// parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    /// Name written to outputs; defaults to the algorithm name.
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    /// Sliding-window length `w`.
    #[serde(default)]
    pub window: Option<usize>,
    /// Restart period `H`.
    #[serde(default)]
    pub restart: Option<usize>,
    /// Lookback `D` of the piecewise-stationary radius.
    #[serde(default)]
    pub lookback: Option<usize>,
    /// Arm played by `fixed_arm`.
    #[serde(default)]
    pub arm: Option<usize>,
}

impl PolicyConfig {
    pub fn new(kind: PolicyKind) -> Self {
        Self {
            kind,
            label: None,
            gamma: None,
            lambda: None,
            delta: None,
            window: None,
            restart: None,
            lookback: None,
            arm: None,
        }
    }

    pub fn display_name(&self) -> String {
        self.label.clone().unwrap_or_else(|| self.kind.label().to_string())
    }
}

/// Problem-level quantities the tuning rules depend on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    pub setting: Setting,
    pub d: usize,
    pub horizon: usize,
    pub s: f64,
    pub l: f64,
    pub r: f64,
    pub m: f64,
    pub delta: f64,
    /// `P_T` of the environment.
    pub path_length: f64,
    /// `Γ_T` of the environment.
    pub changes: usize,
}

impl Problem {
    /// Identity link for linear rewards, logistic otherwise.
    pub fn link(&self) -> Link {
        match self.setting {
            Setting::Lb => Link::IDENTITY,
            _ => Link::LOGISTIC,
        }
    }

    pub fn constants(&self) -> Result<GlmConstants> {
        link_constants(self.link(), self.s, self.l, self.r, self.m)
    }
}

/// Parameter values a built policy actually uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tuning {
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub window: Option<usize>,
    pub restart: Option<usize>,
    pub lookback: Option<usize>,
    pub radius: Option<f64>,
}

fn check_override(name: &str, v: Option<f64>, ok: impl Fn(f64) -> bool) -> Result<()> {
    match v {
        Some(x) if !ok(x) => Err(Error::Config(format!("invalid {name} override {x}"))),
        _ => Ok(()),
    }
}

/// Builds a fresh policy for `problem`, filling every parameter that `cfg`
/// leaves open from the tuning rules.
pub fn build_policy(cfg: &PolicyConfig, problem: &Problem) -> Result<(Box<dyn Policy>, Tuning)> {
    let kind = cfg.kind;
    if kind.is_linear() && problem.setting != Setting::Lb {
        return Err(Error::Config(format!(
            "{kind} assumes linear rewards and cannot run in the {} setting",
            problem.setting
        )));
    }
    check_override("gamma", cfg.gamma, |g| g > 0.0 && g <= 1.0)?;
    check_override("lambda", cfg.lambda, |l| l > 0.0 && l.is_finite())?;
    check_override("delta", cfg.delta, |d| d > 0.0 && d < 1.0)?;
    let consts = problem.constants()?;
    let (k_mu, c_mu) = if kind.is_linear() { (1.0, 1.0) } else { (consts.k_mu, consts.c_mu) };
    let (d, t) = (problem.d, problem.horizon);
    let p_t = problem.path_length;

    let tuned_gamma = |setting: Setting, measure: f64| -> Result<f64> {
        match cfg.gamma {
            Some(g) => Ok(g),
            None => tune_gamma(setting, t, d, measure, k_mu, c_mu),
        }
    };
    let period = |given: Option<usize>| given.unwrap_or_else(|| tune_window_restart(d, t, p_t));

    let (gamma, lambda) = match kind {
        PolicyKind::LbWeight | PolicyKind::DLinucb => (tuned_gamma(Setting::Lb, p_t)?, default_lambda(Setting::Lb, d, t, 1.0)),
        PolicyKind::Oful | PolicyKind::SwLinucb | PolicyKind::RestartLinucb => (1.0, d as f64),
        PolicyKind::GlbWeight => (tuned_gamma(Setting::Glb, p_t)?, default_lambda(Setting::Glb, d, t, c_mu)),
        PolicyKind::GlmUcb | PolicyKind::RestartGlm => (1.0, d as f64),
        PolicyKind::ScbWeight => (tuned_gamma(Setting::Scb, p_t)?, default_lambda(Setting::Scb, d, t, c_mu)),
        PolicyKind::ScbUcb | PolicyKind::RestartScb => (1.0, default_lambda(Setting::Scb, d, t, c_mu)),
        PolicyKind::ScbPwWeight => {
            (tuned_gamma(Setting::ScbPw, problem.changes as f64)?, default_lambda(Setting::ScbPw, d, t, c_mu))
        }
        PolicyKind::FixedArm => {
            let arm = cfg.arm.unwrap_or(0);
            return Ok((Box::new(FixedArm::new(arm)), Tuning::default()));
        }
    };
    let gamma = cfg.gamma.unwrap_or(gamma);
    let lambda = cfg.lambda.unwrap_or(lambda);
    let lookback = cfg.lookback.unwrap_or_else(|| default_lookback(t, gamma));
    let params = RadiusParams {
        gamma,
        lambda,
        d,
        s: problem.s,
        l: problem.l,
        r: problem.r,
        m: problem.m,
        c_mu,
        k_mu,
        delta: cfg.delta.unwrap_or(problem.delta),
        lookback,
    };
    let mut tuning = Tuning { gamma: Some(gamma), lambda: Some(lambda), ..Tuning::default() };
    let link = if kind.is_linear() { Link::IDENTITY } else { problem.link() };

    let policy: Box<dyn Policy> = match kind {
        PolicyKind::LbWeight | PolicyKind::DLinucb | PolicyKind::Oful => Box::new(LinUcb::new(kind, params)?),
        PolicyKind::SwLinucb => {
            let w = period(cfg.window);
            tuning.window = Some(w);
            Box::new(SwLinUcb::new(params, w)?)
        }
        PolicyKind::GlbWeight | PolicyKind::GlmUcb | PolicyKind::ScbWeight | PolicyKind::ScbUcb => {
            Box::new(GlmUcb::new(kind, link, params)?)
        }
        PolicyKind::RestartLinucb | PolicyKind::RestartGlm | PolicyKind::RestartScb => {
            let h = period(cfg.restart);
            tuning.restart = Some(h);
            let base: Box<dyn Policy> = match kind {
                PolicyKind::RestartLinucb => Box::new(LinUcb::new(PolicyKind::Oful, params)?),
                PolicyKind::RestartGlm => Box::new(GlmUcb::new(PolicyKind::GlmUcb, link, params)?),
                _ => Box::new(GlmUcb::new(PolicyKind::ScbUcb, link, params)?),
            };
            Box::new(Restart::new(kind, h, base)?)
        }
        PolicyKind::ScbPwWeight => {
            tuning.lookback = Some(lookback);
            tuning.radius = Some(rho_pw(0, &params)?);
            Box::new(ScbPwUcb::new(link, params)?)
        }
        PolicyKind::FixedArm => unreachable!("handled above"),
    };
    Ok((policy, tuning))
}

/// Builds one of the comparison baselines.
pub fn make_baseline(kind: PolicyKind, cfg: &PolicyConfig, problem: &Problem) -> Result<Box<dyn Policy>> {
    match kind {
        PolicyKind::Oful
        | PolicyKind::SwLinucb
        | PolicyKind::RestartLinucb
        | PolicyKind::GlmUcb
        | PolicyKind::RestartGlm
        | PolicyKind::RestartScb
        | PolicyKind::ScbUcb
        | PolicyKind::FixedArm => {
            let cfg = PolicyConfig { kind, ..cfg.clone() };
            Ok(build_policy(&cfg, problem)?.0)
        }
        other => Err(Error::Config(format!("{other} is not a baseline"))),
    }
}
