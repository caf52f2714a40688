//! Confidence radii and tuning rules for the discount factor, regularizer,
//! window length and restart period.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Problem family a policy is tuned for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "LB")]
    Lb,
    #[serde(rename = "GLB")]
    Glb,
    #[serde(rename = "SCB")]
    Scb,
    #[serde(rename = "SCB-PW")]
    ScbPw,
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "LB" => Ok(Setting::Lb),
            "GLB" => Ok(Setting::Glb),
            "SCB" => Ok(Setting::Scb),
            "SCB-PW" => Ok(Setting::ScbPw),
            other => Err(Error::InvalidParameter(format!("unknown setting `{other}`"))),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::Lb => "LB",
            Setting::Glb => "GLB",
            Setting::Scb => "SCB",
            Setting::ScbPw => "SCB-PW",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiusParams {
    pub gamma: f64,
    pub lambda: f64,
    pub d: usize,
    pub s: f64,
    pub l: f64,
    pub r: f64,
    pub m: f64,
    pub c_mu: f64,
    pub k_mu: f64,
    pub delta: f64,
    /// Lookback `D` of the piecewise-stationary confidence set.
    pub lookback: usize,
}

impl RadiusParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidParameter(what.to_string()));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if self.d == 0 {
            return bad("dimension must be positive");
        }
        for (name, v) in [("lambda", self.lambda), ("S", self.s), ("L", self.l), ("c_mu", self.c_mu), ("k_mu", self.k_mu)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.r >= 0.0 && self.m >= 0.0) {
            return bad("R and m must be non-negative");
        }
        Ok(())
    }

    /// `(1 − γ^{2t}) / (1 − γ²)`, i.e. `Σ_{k<t} γ^{2k}`.
    fn squared_mass(&self, t: usize) -> f64 {
        if self.gamma >= 1.0 {
            t as f64
        } else {
            (1.0 - self.gamma.powi(2 * t as i32)) / (1.0 - self.gamma * self.gamma)
        }
    }

    fn noise_term(&self, t: usize) -> f64 {
        let d = self.d as f64;
        let inner = 2.0 * (1.0 / self.delta).ln()
            + d * (1.0 + self.l * self.l * self.squared_mass(t) / (self.lambda * d)).ln();
        self.r * inner.sqrt()
    }
}

/// `β_t = √λ S + R√(2log(1/δ) + d log(1 + L²(1−γ^{2t})/(λd(1−γ²))))`.
pub fn beta_lb(t: usize, p: &RadiusParams) -> f64 {
    p.lambda.sqrt() * p.s + p.noise_term(t)
}

/// Same as [`beta_lb`] with the bias term scaled by `c_μ`.
pub fn beta_glb(t: usize, p: &RadiusParams) -> f64 {
    p.lambda.sqrt() * p.c_mu * p.s + p.noise_term(t)
}

/// Radius of the self-concordant confidence set.
pub fn beta_scb(t: usize, p: &RadiusParams) -> f64 {
    let d = p.d as f64;
    let root = (p.lambda * p.c_mu).sqrt();
    let log_term =
        (1.0 + p.l * p.l * p.k_mu * p.squared_mass(t) / (p.lambda * p.c_mu * d)).ln();
    root / (2.0 * p.m)
        + 2.0 * p.m / root * ((1.0 / p.delta).ln() + d * 2f64.ln())
        + d * p.m / root * log_term
        + root * p.s
}

/// Stationary part `β̆` of the piecewise-stationary radius.
pub fn beta_breve(p: &RadiusParams) -> Result<f64> {
    if p.gamma >= 1.0 {
        return Err(Error::InvalidParameter("piecewise radius needs gamma < 1".into()));
    }
    if p.lookback == 0 {
        return Err(Error::InvalidParameter("lookback D must be at least 1".into()));
    }
    let d = p.d as f64;
    let root = (p.lambda * p.c_mu).sqrt();
    let mass = (1.0 - p.gamma.powi(2 * p.lookback as i32)) / (1.0 - p.gamma);
    Ok(root / (2.0 * p.m)
        + 2.0 * p.m / root * (1.0 / p.delta).ln()
        + d * p.m / root * (1.0 + p.l * p.l * p.k_mu * mass / (p.lambda * p.c_mu * d)).ln()
        + 2.0 * p.m / root * d * 2f64.ln()
        + root * p.s)
}

/// Radius `ρ_t` of the piecewise-stationary confidence set: `β̆` plus the
/// drift terms `(2L²Sk_μ + Lm)/√(λc_μ) · γ^D/(1−γ)`.
///
/// The radius does not depend on `t`; the argument is kept for symmetry with
/// the other radii.
pub fn rho_pw(_t: usize, p: &RadiusParams) -> Result<f64> {
    let breve = beta_breve(p)?;
    let root = (p.lambda * p.c_mu).sqrt();
    let tail = p.gamma.powi(p.lookback as i32) / (1.0 - p.gamma);
    Ok((2.0 * p.l * p.l * p.s * p.k_mu + p.l * p.m) / root * tail + breve)
}

/// Lower clamp applied to every tuned discount factor.
pub const GAMMA_FLOOR: f64 = 0.5;

/// Tuned discount factor for `setting`. `measure` is the path
/// length `P_T` for the drifting settings and the change count `Γ_T` for
/// `SCB-PW`.
pub fn tune_gamma(setting: Setting, horizon: usize, d: usize, measure: f64, k_mu: f64, c_mu: f64) -> Result<f64> {
    if horizon < 2 {
        return Err(Error::InvalidParameter("horizon must be at least 2".into()));
    }
    if !(measure >= 0.0) {
        return Err(Error::InvalidParameter(format!("non-stationarity measure must be non-negative, got {measure}")));
    }
    let t = horizon as f64;
    let d = d as f64;
    // k_μ < 1 is dropped from the radicand.
    let k = k_mu.max(1.0);
    let drift = match setting {
        Setting::Lb => (measure / (d * t)).sqrt(),
        Setting::Glb => (k * c_mu * measure / (d * t)).sqrt(),
        Setting::Scb => (k * measure / (d * t)).sqrt(),
        Setting::ScbPw => (measure / (d * t)).powf(2.0 / 3.0),
    };
    let gamma = 1.0 - drift.max(1.0 / t);
    let floor = match setting {
        Setting::ScbPw => GAMMA_FLOOR + 1e-6,
        _ => GAMMA_FLOOR,
    };
    if gamma < floor {
        log::info!("tuned gamma {gamma} for {setting} clamped to {floor}");
        return Ok(floor);
    }
    Ok(gamma)
}

/// Window length / restart period `round(d^{1/4}·√(T/(1+P_T)))`, at least 1.
pub fn tune_window_restart(d: usize, horizon: usize, path_length: f64) -> usize {
    let w = (d as f64).powf(0.25) * (horizon as f64 / (1.0 + path_length.max(0.0))).sqrt();
    (w.round() as usize).max(1)
}

/// Regularizer prescribed for each setting: `d`, `d/c_μ²`, or `d·log(T)/c_μ`.
pub fn default_lambda(setting: Setting, d: usize, horizon: usize, c_mu: f64) -> f64 {
    let d = d as f64;
    match setting {
        Setting::Lb => d,
        Setting::Glb => d / (c_mu * c_mu),
        Setting::Scb | Setting::ScbPw => d * (horizon as f64).ln() / c_mu,
    }
}

/// Lookback `D = ⌈log T / log(1/γ)⌉`.
pub fn default_lookback(horizon: usize, gamma: f64) -> usize {
    if gamma >= 1.0 {
        return horizon.max(1);
    }
    ((horizon as f64).ln() / (1.0 / gamma).ln()).ceil().max(1.0) as usize
}
