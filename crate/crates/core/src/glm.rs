//! Generalized linear model machinery shared by the GLM and self-concordant
//! policies.
//!
//! The weighted quasi-likelihood score is
//!
//! ```text
//!   score(θ) = λc_μ θ + Σ_s w_s (μ(x_sᵀθ) − r_s) x_s,      w_s = γ^{t−s−1}
//! ```
//!
//! and `g(θ) = λc_μ θ + Σ_s w_s μ(x_sᵀθ) x_s` is its reward-free part. Both are
//! nonlinear in `θ`, so the raw history has to be kept. Pairs that share the
//! exact same feature vector are merged: `Σ w_s μ(xᵀθ) x` only depends on the
//! accumulated weight of that vector, and the reward term only on the
//! accumulated weighted reward.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SpdFactor};

/// Entries whose accumulated weight falls below this are dropped.
const PRUNE_WEIGHT: f64 = 1e-18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Identity,
    Logistic,
}

/// Inverse link function `μ` with its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Link {
    pub kind: LinkKind,
}

impl Link {
    pub const IDENTITY: Link = Link { kind: LinkKind::Identity };
    pub const LOGISTIC: Link = Link { kind: LinkKind::Logistic };

    pub fn mu(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => z,
            LinkKind::Logistic => {
                if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                }
            }
        }
    }

    pub fn dmu(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => 1.0,
            LinkKind::Logistic => {
                let e = (-z.abs()).exp();
                e / ((1.0 + e) * (1.0 + e))
            }
        }
    }

    pub fn ddmu(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => 0.0,
            LinkKind::Logistic => {
                let e = (-z.abs()).exp();
                let mag = e * (1.0 - e) / ((1.0 + e) * (1.0 + e) * (1.0 + e));
                if z > 0.0 {
                    -mag
                } else {
                    mag
                }
            }
        }
    }

    /// Antiderivative `b` of `μ` (the log-partition function for canonical
    /// links), used as the convex objective behind the score.
    pub fn cumulant(&self, z: f64) -> f64 {
        match self.kind {
            LinkKind::Identity => 0.5 * z * z,
            LinkKind::Logistic => z.max(0.0) + (-z.abs()).exp().ln_1p(),
        }
    }

    /// Whether `|μ″| ≤ μ′` holds everywhere.
    pub fn self_concordant(&self) -> bool {
        true
    }
}

/// Constants of a GLM bandit instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlmConstants {
    pub k_mu: f64,
    pub c_mu: f64,
    pub s: f64,
    pub l: f64,
    pub r: f64,
    pub m: f64,
}

/// `k_μ` and `c_μ = inf μ′(θᵀx)` over `|θ| ≤ S`, `|x| ≤ L`.
pub fn link_constants(link: Link, s: f64, l: f64, r: f64, m: f64) -> Result<GlmConstants> {
    if !(s > 0.0 && l > 0.0) {
        return Err(Error::InvalidParameter(format!("S and L must be positive (S={s}, L={l})")));
    }
    let (k_mu, c_mu) = match link.kind {
        LinkKind::Identity => (1.0, 1.0),
        // μ′ is even and decreasing in |z|, so the infimum sits at |z| = SL.
        LinkKind::Logistic => (0.25, link.dmu(s * l)),
    };
    Ok(GlmConstants { k_mu, c_mu, s, l, r, m })
}

#[derive(Debug, Clone)]
struct Entry {
    x: Vec<f64>,
    weight: f64,
    weighted_reward: f64,
}

/// Discounted observation history with exact merging of repeated arms.
#[derive(Debug, Clone)]
pub struct WeightedHistory {
    dim: usize,
    lambda: f64,
    gamma: f64,
    round: usize,
    entries: Vec<Entry>,
    index: HashMap<Vec<u64>, usize>,
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

impl WeightedHistory {
    pub fn new(dim: usize, lambda: f64, gamma: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if !(lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        Ok(Self { dim, lambda, gamma, round: 0, entries: Vec::new(), index: HashMap::new() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// Number of distinct feature vectors currently stored.
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Appends `(x, r)`; previously stored weights are discounted by `γ`.
    pub fn push(&mut self, x: &[f64], r: f64) -> Result<()> {
        Error::check_dim(self.dim, x.len())?;
        if self.gamma < 1.0 {
            let mut stale = false;
            for e in &mut self.entries {
                e.weight *= self.gamma;
                e.weighted_reward *= self.gamma;
                stale |= e.weight < PRUNE_WEIGHT;
            }
            if stale {
                self.entries.retain(|e| e.weight >= PRUNE_WEIGHT);
                self.index =
                    self.entries.iter().enumerate().map(|(i, e)| (key(&e.x), i)).collect();
            }
        }
        let k = key(x);
        match self.index.get(&k) {
            Some(&i) => {
                self.entries[i].weight += 1.0;
                self.entries[i].weighted_reward += r;
            }
            None => {
                self.index.insert(k, self.entries.len());
                self.entries.push(Entry { x: x.to_vec(), weight: 1.0, weighted_reward: r });
            }
        }
        self.round += 1;
        Ok(())
    }

    /// `(x, Σw, Σw·r)` per stored feature vector, in first-seen order.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64, f64)> {
        self.entries.iter().map(|e| (e.x.as_slice(), e.weight, e.weighted_reward))
    }

    /// `Σ_s w_s r_s x_s`.
    pub fn response(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim);
        for (x, _, wr) in self.iter() {
            for i in 0..self.dim {
                out[i] += wr * x[i];
            }
        }
        out
    }

    /// `V = λI + Σ_s w_s x_s x_sᵀ`.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        let mut v = DMatrix::identity(self.dim, self.dim) * self.lambda;
        for (x, w, _) in self.iter() {
            add_outer(&mut v, x, w);
        }
        v
    }
}

fn add_outer(m: &mut DMatrix<f64>, x: &[f64], w: f64) {
    let d = x.len();
    for j in 0..d {
        let wx = w * x[j];
        for i in 0..d {
            m[(i, j)] += wx * x[i];
        }
    }
}

fn check_theta(hist: &WeightedHistory, theta: &DVector<f64>) -> Result<()> {
    Error::check_dim(hist.dim(), theta.len())
}

/// `g(θ) = λc_μθ + Σ w μ(xᵀθ) x`.
pub fn g_map(hist: &WeightedHistory, link: Link, c_mu: f64, theta: &DVector<f64>) -> DVector<f64> {
    let mut out = theta * (hist.lambda() * c_mu);
    for (x, w, _) in hist.iter() {
        let m = w * link.mu(linalg::dot(x, theta.as_slice()));
        for i in 0..x.len() {
            out[i] += m * x[i];
        }
    }
    out
}

/// Weighted regularized score `λc_μθ + Σ w (μ(xᵀθ) − r) x`.
pub fn glm_score(
    hist: &WeightedHistory,
    link: Link,
    c_mu: f64,
    theta: &DVector<f64>,
) -> Result<DVector<f64>> {
    check_theta(hist, theta)?;
    let mut out = theta * (hist.lambda() * c_mu);
    for (x, w, wr) in hist.iter() {
        let m = w * link.mu(linalg::dot(x, theta.as_slice())) - wr;
        for i in 0..x.len() {
            out[i] += m * x[i];
        }
    }
    Ok(out)
}

/// Convex objective whose gradient is [`glm_score`]:
/// `λc_μ|θ|²/2 + Σ (w·b(xᵀθ) − w·r·xᵀθ)`.
pub fn glm_objective(hist: &WeightedHistory, link: Link, c_mu: f64, theta: &DVector<f64>) -> f64 {
    let mut acc = 0.5 * hist.lambda() * c_mu * theta.norm_squared();
    for (x, w, wr) in hist.iter() {
        let z = linalg::dot(x, theta.as_slice());
        acc += w * link.cumulant(z) - wr * z;
    }
    acc
}

/// `H(θ) = λc_μI + Σ w μ′(xᵀθ) x xᵀ`, which is also the Jacobian of the score.
pub fn h_matrix(hist: &WeightedHistory, link: Link, c_mu: f64, theta: &DVector<f64>) -> DMatrix<f64> {
    let d = hist.dim();
    let mut h = DMatrix::identity(d, d) * (hist.lambda() * c_mu);
    for (x, w, _) in hist.iter() {
        add_outer(&mut h, x, w * link.dmu(linalg::dot(x, theta.as_slice())));
    }
    h
}

#[derive(Debug, Clone)]
pub struct MleOutcome {
    pub theta: DVector<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub tolerance: f64,
    /// `(objective before, objective after)` for every line-searched step.
    pub damped_steps: Vec<(f64, f64)>,
}

pub const MLE_MAX_ITERATIONS: usize = 100;

/// Relative stopping tolerance on the score norm.
pub const MLE_TOLERANCE: f64 = 1e-9;

pub fn glm_mle(hist: &WeightedHistory, link: Link, c_mu: f64) -> Result<MleOutcome> {
    glm_mle_from(hist, link, c_mu, &DVector::zeros(hist.dim()))
}

/// Damped Newton with Armijo backtracking on [`glm_objective`], started at
/// `start`.
pub fn glm_mle_from(
    hist: &WeightedHistory,
    link: Link,
    c_mu: f64,
    start: &DVector<f64>,
) -> Result<MleOutcome> {
    check_theta(hist, start)?;
    let tolerance = MLE_TOLERANCE * (1.0 + hist.response().norm());
    let mut theta = start.clone();
    let mut damped_steps = Vec::new();
    let mut residual = f64::INFINITY;
    for iteration in 0..=MLE_MAX_ITERATIONS {
        let grad = glm_score(hist, link, c_mu, &theta)?;
        residual = grad.norm();
        if residual <= tolerance {
            return Ok(MleOutcome { theta, iterations: iteration, residual, tolerance, damped_steps });
        }
        if iteration == MLE_MAX_ITERATIONS {
            break;
        }
        let h = h_matrix(hist, link, c_mu, &theta);
        let step = -SpdFactor::new(&h)?.solve(&grad);
        let slope = grad.dot(&step);
        let f0 = glm_objective(hist, link, c_mu, &theta);
        // Predicted decrease below the objective's rounding noise: the line
        // search can no longer resolve progress, take the Newton step.
        if -slope <= 1e-13 * (1.0 + f0.abs()) {
            theta += step;
            continue;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand = &theta + &step * alpha;
            let f1 = glm_objective(hist, link, c_mu, &cand);
            if f1 <= f0 + 1e-4 * alpha * slope {
                damped_steps.push((f0, f1));
                theta = cand;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(Error::NonConvergence { iterations: MLE_MAX_ITERATIONS, residual })
}

/// `‖g(θ̂) − g(θ)‖²_{V⁻¹}` with `V` the discounted design matrix.
pub fn projection_objective_v(
    hist: &WeightedHistory,
    link: Link,
    c_mu: f64,
    theta_hat: &DVector<f64>,
    theta: &DVector<f64>,
) -> Result<f64> {
    let v = SpdFactor::new(&hist.design_matrix())?;
    let diff = g_map(hist, link, c_mu, theta_hat) - g_map(hist, link, c_mu, theta);
    Ok(v.inv_quad(diff.as_slice()))
}

/// `‖g(θ̂) − g(θ)‖²_{H(θ)⁻¹}`.
pub fn projection_objective_h(
    hist: &WeightedHistory,
    link: Link,
    c_mu: f64,
    theta_hat: &DVector<f64>,
    theta: &DVector<f64>,
) -> Result<f64> {
    let target = g_map(hist, link, c_mu, theta_hat);
    h_norm_sq(hist, link, c_mu, &target, theta).map(|(v, _)| v)
}

/// `(‖target − g(θ)‖²_{H(θ)⁻¹}, target − g(θ))`.
pub(crate) fn h_norm_sq(
    hist: &WeightedHistory,
    link: Link,
    c_mu: f64,
    target: &DVector<f64>,
    theta: &DVector<f64>,
) -> Result<(f64, DVector<f64>)> {
    let diff = target - g_map(hist, link, c_mu, theta);
    let h = SpdFactor::new(&h_matrix(hist, link, c_mu, theta))?;
    Ok((h.inv_quad(diff.as_slice()), diff))
}

const PROJECTION_ITERATIONS: usize = 200;

/// Projected gradient descent over the ball `|θ| ≤ radius` with backtracking.
/// `eval` returns the objective and a descent gradient at a point; `step0` is
/// the initial step size. Only strict decreases are accepted.
fn projected_descent<F>(
    start: DVector<f64>,
    radius: f64,
    step0: f64,
    eval: &F,
) -> Result<(DVector<f64>, f64)>
where
    F: Fn(&DVector<f64>) -> Result<(f64, DVector<f64>)>,
{
    let mut x = linalg::project_ball(&start, radius);
    let (mut fx, mut gx) = eval(&x)?;
    let mut step = step0;
    for _ in 0..PROJECTION_ITERATIONS {
        let mut moved = false;
        for _ in 0..50 {
            let cand = linalg::project_ball(&(&x - &gx * step), radius);
            let delta = &cand - &x;
            if delta.norm() <= 1e-15 * (1.0 + x.norm()) {
                break;
            }
            let (fc, gc) = eval(&cand)?;
            // Sufficient decrease for the projected step.
            if fc < fx && fc <= fx + 0.5 * gx.dot(&delta) {
                x = cand;
                fx = fc;
                gx = gc;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved || fx <= 0.0 {
            break;
        }
        step *= 2.0;
    }
    Ok((x, fx))
}

fn radial(theta_hat: &DVector<f64>, radius: f64) -> DVector<f64> {
    linalg::project_ball(theta_hat, radius)
}

fn best_of(
    runs: impl IntoIterator<Item = Result<(DVector<f64>, f64)>>,
) -> Result<(DVector<f64>, f64)> {
    let mut best: Option<(DVector<f64>, f64)> = None;
    for run in runs {
        let (x, f) = run?;
        if best.as_ref().is_none_or(|(_, bf)| f < *bf) {
            best = Some((x, f));
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Projection of `θ̂` onto `{|θ| ≤ S}` in the `‖g(θ̂) − g(θ)‖_{V⁻¹}` geometry.
/// Feasible input is returned unchanged.
pub fn project_v(
    theta_hat: &DVector<f64>,
    hist: &WeightedHistory,
    link: Link,
    c_mu: f64,
    s: f64,
) -> Result<DVector<f64>> {
    check_theta(hist, theta_hat)?;
    if theta_hat.norm() <= s * (1.0 + 1e-12) {
        return Ok(theta_hat.clone());
    }
    let v = SpdFactor::new(&hist.design_matrix())?;
    let target = g_map(hist, link, c_mu, theta_hat);
    let eval = |theta: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
        let diff = &target - g_map(hist, link, c_mu, theta);
        let vinv_diff = v.solve(&diff);
        let h = h_matrix(hist, link, c_mu, theta);
        Ok((diff.dot(&vinv_diff), -2.0 * (h * vinv_diff)))
    };
    let trace_h = h_matrix(hist, link, c_mu, &radial(theta_hat, s)).trace();
    let step0 = hist.lambda() / (2.0 * trace_h * trace_h);
    let (theta, _) = best_of([
        projected_descent(radial(theta_hat, s), s, step0, &eval),
        projected_descent(DVector::zeros(hist.dim()), s, step0, &eval),
    ])?;
    Ok(theta)
}

/// Projection of `θ̂` onto `{|θ| ≤ S}` in the local `‖g(θ̂) − g(θ)‖_{H(θ)⁻¹}`
/// geometry. `H` is frozen within each gradient evaluation.
pub fn project_h(
    theta_hat: &DVector<f64>,
    hist: &WeightedHistory,
    link: Link,
    c_mu: f64,
    s: f64,
) -> Result<DVector<f64>> {
    check_theta(hist, theta_hat)?;
    if theta_hat.norm() <= s * (1.0 + 1e-12) {
        return Ok(theta_hat.clone());
    }
    let target = g_map(hist, link, c_mu, theta_hat);
    let eval = |theta: &DVector<f64>| -> Result<(f64, DVector<f64>)> {
        let (value, diff) = h_norm_sq(hist, link, c_mu, &target, theta)?;
        Ok((value, -2.0 * diff))
    };
    let trace_h = h_matrix(hist, link, c_mu, &radial(theta_hat, s)).trace();
    let step0 = 1.0 / (2.0 * trace_h);
    let (theta, _) = best_of([
        projected_descent(radial(theta_hat, s), s, step0, &eval),
        projected_descent(DVector::zeros(hist.dim()), s, step0, &eval),
    ])?;
    Ok(theta)
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
        h / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(fa, flm, fm, m - a);
        let right = simpson(fm, frm, fb, b - m);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let whole = simpson(fa, fm, fb, b - a);
    recurse(f, a, b, fa, fm, fb, whole, tol, 40)
}

pub const QUADRATURE_TOLERANCE: f64 = 1e-10;

/// Bounds on the mean slope of a self-concordant link between `z1` and `z2`:
///
/// ```text
///   μ′(z₁)(1 − e^{−|Δ|})/|Δ|  ≤  ∫₀¹ μ′(z₁ + v(z₂ − z₁)) dv  ≤  μ′(z₁)(e^{|Δ|} − 1)/|Δ|
/// ```
///
/// Returns `(lower, mid, upper)`.
pub fn sc_sandwich(link: Link, z1: f64, z2: f64) -> (f64, f64, f64) {
    let d1 = link.dmu(z1);
    let delta = (z1 - z2).abs();
    if delta == 0.0 {
        return (d1, d1, d1);
    }
    let lower = d1 * -(-delta).exp_m1() / delta;
    let upper = d1 * delta.exp_m1() / delta;
    let mid = adaptive_simpson(&|v: f64| link.dmu(z1 + v * (z2 - z1)), 0.0, 1.0, QUADRATURE_TOLERANCE);
    (lower, mid, upper)
}

/// Mean-value matrix `G(θ₁, θ₂) = ∫₀¹ ∇g(sθ₂ + (1−s)θ₁) ds`, so that
/// `g(θ₁) − g(θ₂) = G(θ₁, θ₂)(θ₁ − θ₂)`. Computed by quadrature; used by the
/// invariant checks.
pub fn mean_value_matrix(
    hist: &WeightedHistory,
    link: Link,
    c_mu: f64,
    theta1: &DVector<f64>,
    theta2: &DVector<f64>,
) -> DMatrix<f64> {
    let d = hist.dim();
    let mut g = DMatrix::identity(d, d) * (hist.lambda() * c_mu);
    for (x, w, _) in hist.iter() {
        let z1 = linalg::dot(x, theta1.as_slice());
        let z2 = linalg::dot(x, theta2.as_slice());
        let alpha =
            adaptive_simpson(&|s: f64| link.dmu(z1 + s * (z2 - z1)), 0.0, 1.0, QUADRATURE_TOLERANCE);
        add_outer(&mut g, x, w * alpha);
    }
    g
}
