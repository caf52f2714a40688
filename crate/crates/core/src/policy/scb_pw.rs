use nalgebra::DVector;

use super::{Policy, PolicyKind, Selection};
use crate::confidence::{rho_pw, RadiusParams};
use crate::design::DesignState;
use crate::env::ArmSet;
use crate::error::{Error, Result};
use crate::glm::{g_map, glm_mle_from, h_matrix, h_norm_sq, project_h, Link, WeightedHistory};
use crate::linalg::{dot, project_ball, SpdFactor};

const ASCENT_ITERATIONS: usize = 100;
const PENALTY_WEIGHT: f64 = 1e3;
const BISECTION_STEPS: usize = 40;

/// Parameter-based optimistic policy for piecewise-stationary self-concordant
/// bandits: each arm is scored by `max μ(xᵀθ)` over the confidence set
///
/// ```text
///   C = { |θ| ≤ S : ‖g(θ) − g(θ̂)‖_{H(θ)⁻¹} ≤ ρ }
/// ```
///
/// The inner maximization starts from a feasible anchor (`θ̂` itself when it
/// lies in the ball, otherwise its `H`-norm projection), jumps to the boundary
/// of the local ellipsoid, and is refined by penalized projected gradient
/// ascent. Infeasible iterates are pulled back toward the best feasible point
/// by bisection, so the returned witness always satisfies the constraint.
#[derive(Debug, Clone)]
pub struct ScbPwUcb {
    link: Link,
    params: RadiusParams,
    rho: f64,
    history: WeightedHistory,
    design: DesignState,
    factor: SpdFactor,
    theta_hat: DVector<f64>,
    target: DVector<f64>,
    projected: DVector<f64>,
    anchor: Option<DVector<f64>>,
}

impl ScbPwUcb {
    pub fn new(link: Link, params: RadiusParams) -> Result<Self> {
        params.validate()?;
        let rho = rho_pw(0, &params)?;
        Self::with_radius(link, params, rho)
    }

    /// Uses `rho` as the confidence radius instead of the tuned one.
    pub fn with_radius(link: Link, params: RadiusParams, rho: f64) -> Result<Self> {
        params.validate()?;
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("radius must be non-negative, got {rho}")));
        }
        let history = WeightedHistory::new(params.d, params.lambda, params.gamma)?;
        let design = DesignState::new(params.d, params.lambda, params.gamma, false)?;
        let zero = DVector::zeros(params.d);
        Ok(Self {
            link,
            params,
            rho,
            factor: design.factor()?,
            history,
            design,
            theta_hat: zero.clone(),
            target: zero.clone(),
            projected: zero.clone(),
            anchor: Some(zero),
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn params(&self) -> &RadiusParams {
        &self.params
    }

    pub fn link(&self) -> Link {
        self.link
    }

    pub fn history(&self) -> &WeightedHistory {
        &self.history
    }

    pub fn theta_hat(&self) -> &DVector<f64> {
        &self.theta_hat
    }

    /// `‖g(θ) − g(θ̂)‖_{H(θ)⁻¹} − ρ`; non-positive inside the confidence set.
    pub fn constraint(&self, theta: &DVector<f64>) -> Result<f64> {
        Ok(self.constraint_with_diff(theta)?.0)
    }

    fn constraint_with_diff(&self, theta: &DVector<f64>) -> Result<(f64, DVector<f64>, f64)> {
        let c_mu = self.params.c_mu;
        let (q, diff) = h_norm_sq(&self.history, self.link, c_mu, &self.target, theta)?;
        let norm = q.max(0.0).sqrt();
        Ok((norm - self.rho, diff, norm))
    }

    /// Whether `θ` lies in the ball and satisfies the constraint.
    pub fn feasible(&self, theta: &DVector<f64>) -> Result<bool> {
        Ok(theta.norm() <= self.params.s * (1.0 + 1e-12) && self.constraint(theta)? <= 0.0)
    }

    /// Furthest feasible point found by bisection on the segment from the
    /// feasible `from` toward `to`.
    fn pull_back(&self, from: &DVector<f64>, to: &DVector<f64>) -> Result<DVector<f64>> {
        let mut lo = 0.0;
        let mut hi = 1.0;
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            let p = from + (to - from) * mid;
            if self.constraint(&p)? <= 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(from + (to - from) * lo)
    }

    /// Approximate `max xᵀθ` over the confidence set, starting from the
    /// feasible `anchor`. Returns `(xᵀθ*, θ*)` with `θ*` feasible.
    pub fn maximize_arm(
        &self,
        x: &[f64],
        anchor: &DVector<f64>,
        anchor_h: &SpdFactor,
    ) -> Result<(f64, DVector<f64>)> {
        let s = self.params.s;
        let xv = DVector::from_column_slice(x);
        let xn = xv.norm();
        let mut best = anchor.clone();
        let mut best_val = xv.dot(anchor);
        if xn == 0.0 {
            return Ok((best_val, best));
        }
        let ball_opt = &xv * (s / xn);
        if self.constraint(&ball_opt)? <= 0.0 {
            return Ok((s * xn, ball_opt));
        }

        let consider = |p: DVector<f64>, best: &mut DVector<f64>, best_val: &mut f64| {
            let v = xv.dot(&p);
            if v > *best_val {
                *best_val = v;
                *best = p;
            }
        };

        // Boundary of the local ellipsoid around the anchor.
        let slack = (-self.constraint(anchor)?).max(0.0);
        let hx = anchor_h.solve(&xv);
        let hx_norm = xv.dot(&hx).max(0.0).sqrt();
        if hx_norm > 0.0 && slack > 0.0 {
            let jump = project_ball(&(anchor + &hx * (slack / hx_norm)), s);
            let landed = if self.constraint(&jump)? <= 0.0 { jump } else { self.pull_back(anchor, &jump)? };
            consider(landed, &mut best, &mut best_val);
        }

        // Penalized projected gradient ascent on xᵀθ − κ·max(0, c(θ))².
        let kappa = PENALTY_WEIGHT / self.rho.max(f64::MIN_POSITIVE);
        let eval = |theta: &DVector<f64>| -> Result<(f64, f64, DVector<f64>)> {
            let (c, diff, norm) = self.constraint_with_diff(theta)?;
            let excess = c.max(0.0);
            let mut grad = xv.clone();
            if excess > 0.0 && norm > 0.0 {
                grad += &diff * (2.0 * kappa * excess / norm);
            }
            Ok((xv.dot(theta) - kappa * excess * excess, c, grad))
        };
        let mut theta = best.clone();
        let (mut f, _, mut grad) = eval(&theta)?;
        let mut step = 0.25 * s / xn;
        let mut last_c = 0.0;
        for _ in 0..ASCENT_ITERATIONS {
            let mut moved = false;
            for _ in 0..30 {
                let cand = project_ball(&(&theta + &grad * step), s);
                if (&cand - &theta).norm() <= 1e-14 * (1.0 + theta.norm()) {
                    break;
                }
                let (fc, cc, gc) = eval(&cand)?;
                if fc > f {
                    theta = cand;
                    f = fc;
                    grad = gc;
                    last_c = cc;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
            if last_c <= 0.0 {
                consider(theta.clone(), &mut best, &mut best_val);
            }
            step *= 2.0;
        }
        if last_c > 0.0 && xv.dot(&theta) > best_val {
            let restored = self.pull_back(&best, &theta)?;
            consider(restored, &mut best, &mut best_val);
        }
        Ok((best_val, best))
    }

    fn fallback(&self, arms: &ArmSet) -> Result<Selection> {
        log::info!("no feasible anchor at round {}; using bonus-form selection", self.history.round());
        let p = &self.params;
        let scale = 2.0 * (1.0 + 2.0 * p.s).sqrt() * p.k_mu / p.c_mu.sqrt() * self.rho;
        let mut scratch = vec![0.0; p.d];
        let theta = self.projected.as_slice();
        let values = arms.iter().map(|x| {
            self.link.mu(dot(x, theta)) + scale * self.factor.inv_quad_with(x, &mut scratch).max(0.0).sqrt()
        });
        let arm = super::argmax(values)?;
        Ok(Selection { arm, witness: None, fallback: true })
    }
}

impl Policy for ScbPwUcb {
    fn kind(&self) -> PolicyKind {
        PolicyKind::ScbPwWeight
    }

    fn select(&self, arms: &ArmSet) -> Result<Selection> {
        Error::check_dim(self.params.d, arms.dim())?;
        let Some(anchor) = self.anchor.as_ref() else {
            return self.fallback(arms);
        };
        let h = SpdFactor::new(&h_matrix(&self.history, self.link, self.params.c_mu, anchor))?;
        let mut best: Option<(usize, f64, DVector<f64>)> = None;
        for (i, x) in arms.iter().enumerate() {
            let (value, witness) = self.maximize_arm(x, anchor, &h)?;
            if best.as_ref().is_none_or(|(_, v, _)| value > *v) {
                best = Some((i, value, witness));
            }
        }
        let (arm, _, witness) = best.ok_or(Error::EmptyArmSet)?;
        Ok(Selection { arm, witness: Some(witness), fallback: false })
    }

    fn observe(&mut self, x: &[f64], r: f64) -> Result<()> {
        self.history.push(x, r)?;
        self.design.update(x, r)?;
        self.factor = self.design.factor()?;
        let c_mu = self.params.c_mu;
        self.theta_hat = glm_mle_from(&self.history, self.link, c_mu, &self.theta_hat)?.theta;
        self.target = g_map(&self.history, self.link, c_mu, &self.theta_hat);
        self.projected = project_h(&self.theta_hat, &self.history, self.link, c_mu, self.params.s)?;
        self.anchor = if self.feasible(&self.projected)? { Some(self.projected.clone()) } else { None };
        Ok(())
    }

    fn round(&self) -> usize {
        self.history.round()
    }

    fn estimate(&self) -> Option<DVector<f64>> {
        Some(self.projected.clone())
    }

    fn witness_violation(&self, witness: &DVector<f64>) -> Result<f64> {
        let s = self.params.s;
        let ball = (witness.norm() - s).max(0.0) / s;
        let set = self.constraint(witness)?.max(0.0) / self.rho.max(f64::MIN_POSITIVE);
        Ok(ball.max(set))
    }

    fn box_clone(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}
