use nalgebra::DVector;

use super::{argmax, Policy, PolicyKind, Selection};
use crate::confidence::{beta_glb, beta_scb, RadiusParams};
use crate::design::DesignState;
use crate::env::ArmSet;
use crate::error::{Error, Result};
use crate::glm::{glm_mle_from, project_h, project_v, Link, WeightedHistory};
use crate::linalg::{dot, SpdFactor};

/// Which confidence set and projection a GLM policy uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GlmVariant {
    /// `V⁻¹`-norm projection, criterion `μ(xᵀθ̃) + (2k_μ/c_μ)β̄‖x‖_{V⁻¹}`.
    Glb,
    /// `H⁻¹`-norm projection, criterion `μ(xᵀθ̃) + 2√(1+2S)(k_μ/√c_μ)β̃‖x‖_{V⁻¹}`.
    Scb,
}

/// Discounted (or, at `γ = 1`, static) optimistic GLM policy.
#[derive(Debug, Clone)]
pub struct GlmUcb {
    kind: PolicyKind,
    variant: GlmVariant,
    link: Link,
    params: RadiusParams,
    history: WeightedHistory,
    design: DesignState,
    factor: SpdFactor,
    theta_hat: DVector<f64>,
    theta_tilde: DVector<f64>,
    beta: f64,
    last_residual: f64,
    last_tolerance: f64,
}

impl GlmUcb {
    pub fn new(kind: PolicyKind, link: Link, params: RadiusParams) -> Result<Self> {
        let variant = match kind {
            PolicyKind::GlbWeight | PolicyKind::GlmUcb => GlmVariant::Glb,
            PolicyKind::ScbWeight | PolicyKind::ScbUcb => GlmVariant::Scb,
            other => return Err(Error::InvalidParameter(format!("{other} is not a GLM policy"))),
        };
        params.validate()?;
        let history = WeightedHistory::new(params.d, params.lambda, params.gamma)?;
        let design = DesignState::new(params.d, params.lambda, params.gamma, false)?;
        let factor = design.factor()?;
        let mut out = Self {
            kind,
            variant,
            link,
            params,
            history,
            design,
            factor,
            theta_hat: DVector::zeros(params.d),
            theta_tilde: DVector::zeros(params.d),
            beta: 0.0,
            last_residual: 0.0,
            last_tolerance: 0.0,
        };
        out.beta = out.radius(0);
        Ok(out)
    }

    fn radius(&self, t: usize) -> f64 {
        match self.variant {
            GlmVariant::Glb => beta_glb(t, &self.params),
            GlmVariant::Scb => beta_scb(t, &self.params),
        }
    }

    /// Multiplier in front of `β‖x‖_{V⁻¹}`.
    pub fn bonus_scale(&self) -> f64 {
        let p = &self.params;
        match self.variant {
            GlmVariant::Glb => 2.0 * p.k_mu / p.c_mu,
            GlmVariant::Scb => 2.0 * (1.0 + 2.0 * p.s).sqrt() * p.k_mu / p.c_mu.sqrt(),
        }
    }

    pub fn variant(&self) -> GlmVariant {
        self.variant
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn params(&self) -> &RadiusParams {
        &self.params
    }

    pub fn history(&self) -> &WeightedHistory {
        &self.history
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Unconstrained maximum quasi-likelihood estimate.
    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    /// Estimate after projection onto the parameter ball.
    pub fn theta_tilde(&self) -> &DVector<f64> {
        &self.theta_tilde
    }

    /// `(|score(θ̂)|, tolerance)` of the most recent solve.
    pub fn last_solve(&self) -> (f64, f64) {
        (self.last_residual, self.last_tolerance)
    }

    /// `‖x‖_{V⁻¹}` under the current design.
    pub fn width(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        self.factor.inv_quad_with(x, scratch).max(0.0).sqrt()
    }
}

impl Policy for GlmUcb {
    fn kind(&self) -> PolicyKind {
        self.kind
    }

    fn select(&self, arms: &ArmSet) -> Result<Selection> {
        Error::check_dim(self.params.d, arms.dim())?;
        let mut scratch = vec![0.0; self.params.d];
        let bonus = self.bonus_scale() * self.beta;
        let theta = self.theta_tilde.as_slice();
        let values =
            arms.iter().map(|x| self.link.mu(dot(x, theta)) + bonus * self.width(x, &mut scratch));
        argmax(values).map(Selection::arm)
    }

    fn observe(&mut self, x: &[f64], r: f64) -> Result<()> {
        self.history.push(x, r)?;
        self.design.update(x, r)?;
        self.factor = self.design.factor()?;
        let c_mu = self.params.c_mu;
        let mle = glm_mle_from(&self.history, self.link, c_mu, &self.theta_hat)?;
        self.last_residual = mle.residual;
        self.last_tolerance = mle.tolerance;
        self.theta_hat = mle.theta;
        self.theta_tilde = match self.variant {
            GlmVariant::Glb => project_v(&self.theta_hat, &self.history, self.link, c_mu, self.params.s)?,
            GlmVariant::Scb => project_h(&self.theta_hat, &self.history, self.link, c_mu, self.params.s)?,
        };
        self.beta = self.radius(self.history.round());
        Ok(())
    }

    fn round(&self) -> usize {
        self.history.round()
    }

    fn estimate(&self) -> Option<DVector<f64>> {
        Some(self.theta_tilde.clone())
    }

    fn box_clone(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}
