//! Invariant checks runnable from the command line.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::confidence::RadiusParams;
use crate::design::{design_rebuild, potential_bound, DesignState, NormKind};
use crate::env::{path_length, piecewise_trajectory, rotating_trajectory, sample_arms, substream};
use crate::error::Result;
use crate::glm::{
    glm_mle, h_matrix, link_constants, mean_value_matrix, project_h, project_v, sc_sandwich, Link,
    WeightedHistory,
};
use crate::linalg::{min_eigenvalue, norm2};
use crate::policy::{LinUcb, Policy, PolicyKind, ScbPwUcb};

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn unit_vector<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm2(&v);
    v.into_iter().map(|x| x / n).collect()
}

fn in_ball<R: Rng>(d: usize, radius: f64, rng: &mut R) -> DVector<f64> {
    let u = unit_vector(d, rng);
    let r = radius * rng.random::<f64>();
    DVector::from_iterator(d, u.into_iter().map(|x| x * r))
}

fn recursion_matches_rebuild(seed: u64) -> Result<Check> {
    let mut rng = substream(seed, 1);
    let mut worst = 0.0f64;
    let mut ordered = true;
    for gamma in [0.5, 0.9, 0.99, 1.0] {
        let mut state = DesignState::new(3, 1.0, gamma, true)?;
        let mut hist = Vec::new();
        for _ in 0..1000 {
            let x = unit_vector(3, &mut rng);
            let r: f64 = rng.sample(StandardNormal);
            state.update(&x, r)?;
            hist.push((x, r));
        }
        let (v, b) = design_rebuild(&hist, 3, 1.0, gamma);
        worst = worst.max((state.v() - v).amax()).max((state.b() - b).amax());
        ordered &= min_eigenvalue(&(state.v() - state.vtilde().expect("tracked"))) >= -1e-9;
    }
    Ok(check("design recursion = closed form", worst <= 1e-8 && ordered, format!("max error {worst:.3e}")))
}

fn potential_and_determinant(seed: u64) -> Result<Check> {
    let arms = sample_arms(20, 2, 1.0, seed)?;
    let mut rng = substream(seed, 2);
    let (horizon, lambda) = (500, 1.0);
    let mut ok = true;
    let mut detail = String::new();
    for gamma in [0.9, 0.99] {
        let mut state = DesignState::new(2, lambda, gamma, false)?;
        let mut potential = 0.0;
        for _ in 0..horizon {
            let x = arms.get(rng.random_range(0..arms.len()));
            potential += state.mnorm(x, NormKind::V)?.powi(2);
            state.update(x, 0.0)?;
            let det = state.v().determinant();
            ok &= det <= state.determinant_bound(1.0) * (1.0 + 1e-12);
        }
        let bound = potential_bound(horizon, gamma, lambda, 1.0, 2);
        ok &= potential <= bound;
        detail += &format!("γ={gamma}: {potential:.3} ≤ {bound:.3}; ");
    }
    Ok(check("potential and determinant bounds", ok, detail))
}

fn mle_and_projections(seed: u64) -> Result<Check> {
    let mut rng = substream(seed, 3);
    let link = Link::LOGISTIC;
    let mut worst = 0.0f64;
    let mut feasible = true;
    for _ in 0..50 {
        let d = rng.random_range(1..=4);
        let mut hist = WeightedHistory::new(d, 1.0, 0.95)?;
        for _ in 0..rng.random_range(1..=60) {
            let x = unit_vector(d, &mut rng);
            hist.push(&x, rng.random_range(0..2) as f64)?;
        }
        let c_mu = link_constants(link, 2.0, 1.0, 0.5, 1.0)?.c_mu;
        let out = glm_mle(&hist, link, c_mu)?;
        worst = worst.max(out.residual / out.tolerance);
        for p in [project_v(&out.theta, &hist, link, c_mu, 2.0)?, project_h(&out.theta, &hist, link, c_mu, 2.0)?] {
            feasible &= p.norm() <= 2.0 * (1.0 + 1e-12);
        }
    }
    Ok(check(
        "score root and feasible projections",
        worst <= 1.0 && feasible,
        format!("worst residual/tolerance {worst:.3e}"),
    ))
}

fn self_concordance(seed: u64) -> Result<Check> {
    let mut rng = substream(seed, 4);
    let link = Link::LOGISTIC;
    let mut ok = true;
    for _ in 0..10_000 {
        let z1 = rng.random_range(-10.0..10.0);
        let z2 = rng.random_range(-10.0..10.0);
        let (lo, mid, hi) = sc_sandwich(link, z1, z2);
        let tol = 1e-9 * link.dmu(z1).max(1e-300);
        ok &= lo <= mid + tol && mid <= hi + tol && mid + tol >= link.dmu(z1) / (1.0 + (z1 - z2).abs());
    }
    let s = 2.0;
    let mut worst = f64::INFINITY;
    for _ in 0..20 {
        let mut hist = WeightedHistory::new(2, 1.0, 0.9)?;
        for _ in 0..10 {
            hist.push(&unit_vector(2, &mut rng), 0.0)?;
        }
        let (t1, t2) = (in_ball(2, s, &mut rng), in_ball(2, s, &mut rng));
        let g = mean_value_matrix(&hist, link, 0.1, &t1, &t2);
        for t in [&t1, &t2] {
            let h = h_matrix(&hist, link, 0.1, t);
            worst = worst.min(min_eigenvalue(&(&g - h / (1.0 + 2.0 * s))));
        }
    }
    ok &= worst >= -1e-8;
    Ok(check("self-concordance sandwich and mean-value bound", ok, format!("min eigenvalue {worst:.3e}")))
}

fn undiscounted_collapse(seed: u64) -> Result<Check> {
    let arms = sample_arms(10, 3, 1.0, seed)?;
    let params = RadiusParams {
        gamma: 1.0,
        lambda: 3.0,
        d: 3,
        s: 1.0,
        l: 1.0,
        r: 1.0,
        m: 1.0,
        c_mu: 1.0,
        k_mu: 1.0,
        delta: 0.01,
        lookback: 1,
    };
    let policies: Vec<LinUcb> = [PolicyKind::Oful, PolicyKind::LbWeight, PolicyKind::DLinucb]
        .into_iter()
        .map(|k| LinUcb::new(k, params))
        .collect::<Result<_>>()?;
    let mut policies = policies;
    let mut rng = substream(seed, 5);
    let mut scratch = vec![0.0; 3];
    // Choices may differ only where two arms tie up to rounding; `worst` is the
    // largest index gap (under the reference policy) between differing choices.
    let mut worst = 0.0f64;
    for _ in 0..300 {
        let choices: Vec<usize> = policies.iter().map(|p| p.select(&arms).map(|s| s.arm)).collect::<Result<_>>()?;
        let reference = &policies[0];
        let index = |i: usize, scratch: &mut [f64]| {
            let x = arms.get(i);
            let theta = reference.estimate().expect("linear estimate");
            crate::linalg::dot(x, theta.as_slice()) + reference.beta() * reference.width(x, scratch)
        };
        let top = index(choices[0], &mut scratch);
        for &c in &choices[1..] {
            worst = worst.max((top - index(c, &mut scratch)).abs() / top.abs().max(1.0));
        }
        let r: f64 = rng.sample(StandardNormal);
        for p in policies.iter_mut() {
            p.observe(arms.get(choices[0]), r)?;
        }
    }
    Ok(check(
        "γ = 1 variants agree with the static policy",
        worst <= 1e-9,
        format!("largest index gap between differing choices {worst:.3e}"),
    ))
}

fn environments(seed: u64) -> Result<Check> {
    let t = 6000;
    let rot = rotating_trajectory(2, t, 1.0)?;
    let closed = (t - 1) as f64 * 2.0 * (std::f64::consts::PI / t as f64).sin();
    let err = (path_length(&rot) - closed).abs();
    let pw = piecewise_trajectory(3, 1000, 7, 2.0, seed)?;
    let ok = err <= 1e-9 && rot.max_norm() <= 1.0 + 1e-12 && pw.max_norm() <= 2.0 + 1e-12;
    Ok(check("trajectory norms and path length", ok, format!("path length error {err:.3e}")))
}

fn witnesses(seed: u64) -> Result<Check> {
    let arms = sample_arms(10, 2, 1.0, seed)?;
    let c = link_constants(Link::LOGISTIC, 3.0, 1.0, 0.5, 1.0)?;
    let params = RadiusParams {
        gamma: 0.98,
        lambda: 2.0 * 300f64.ln() / c.c_mu,
        d: 2,
        s: 3.0,
        l: 1.0,
        r: 0.5,
        m: 1.0,
        c_mu: c.c_mu,
        k_mu: c.k_mu,
        delta: 1.0 / 300.0,
        lookback: 100,
    };
    let mut p = ScbPwUcb::new(Link::LOGISTIC, params)?;
    let mut rng = substream(seed, 6);
    let theta = [2.0, -1.5];
    let mut worst = 0.0f64;
    for _ in 0..150 {
        let sel = p.select(&arms)?;
        if let Some(w) = &sel.witness {
            worst = worst.max(p.witness_violation(w)?);
        }
        let x = arms.get(sel.arm);
        let prob = Link::LOGISTIC.mu(x[0] * theta[0] + x[1] * theta[1]);
        p.observe(x, if rng.random::<f64>() < prob { 1.0 } else { 0.0 })?;
    }
    Ok(check("parameter-based witnesses are feasible", worst <= 1e-6, format!("worst violation {worst:.3e}")))
}

/// Runs every check; a failing computation is reported as a failed check.
pub fn run_checks(seed: u64) -> Vec<Check> {
    let suites: [(&'static str, fn(u64) -> Result<Check>); 7] = [
        ("design recursion = closed form", recursion_matches_rebuild),
        ("potential and determinant bounds", potential_and_determinant),
        ("score root and feasible projections", mle_and_projections),
        ("self-concordance sandwich and mean-value bound", self_concordance),
        ("γ = 1 variants agree with the static policy", undiscounted_collapse),
        ("trajectory norms and path length", environments),
        ("parameter-based witnesses are feasible", witnesses),
    ];
    suites
        .into_iter()
        .map(|(name, f)| f(seed).unwrap_or_else(|e| check(name, false, format!("error: {e}"))))
        .collect()
}
