use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use nsbandit::design::DesignState;
use nsbandit::env::substream;
use nsbandit::glm::{
    glm_mle, glm_objective, glm_score, h_matrix, link_constants, mean_value_matrix, project_h, project_v,
    projection_objective_h, projection_objective_v, sc_sandwich, Link, WeightedHistory,
};
use nsbandit::linalg::min_eigenvalue;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn unit(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.into_iter().map(|a| a / n).collect()
}

fn random_history(d: usize, n: usize, gamma: f64, lambda: f64, rng: &mut impl Rng) -> WeightedHistory {
    let mut h = WeightedHistory::new(d, lambda, gamma).unwrap();
    for _ in 0..n {
        let x = unit(d, rng);
        h.push(&x, rng.random_range(0..2) as f64).unwrap();
    }
    h
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// 100 radii by 100 angles, boundary included.
fn disc_mesh(s: f64) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(10_000);
    for i in 0..100 {
        let r = s * (i as f64 + 1.0) / 100.0;
        for j in 0..100 {
            let a = std::f64::consts::TAU * j as f64 / 100.0;
            out.push(DVector::from_vec(vec![r * a.cos(), r * a.sin()]));
        }
    }
    out
}

#[test]
fn link_constants_match_closed_form() {
    let c1 = link_constants(Link::LOGISTIC, 1.0, 1.0, 0.5, 1.0).unwrap();
    let e = 1f64.exp();
    assert_relative_eq!(c1.c_mu, e / (1.0 + e).powi(2), max_relative = 1e-14);
    assert!((c1.c_mu - 0.19661).abs() < 5e-6);
    // reported as roughly 5
    assert_eq!((1.0 / c1.c_mu).round(), 5.0);
    assert_eq!(c1.k_mu, 0.25);

    let c5 = link_constants(Link::LOGISTIC, 5.0, 1.0, 0.5, 1.0).unwrap();
    let e5 = 5f64.exp();
    assert_relative_eq!(c5.c_mu, e5 / (1.0 + e5).powi(2), max_relative = 1e-14);
    // exact value 0.00664806, pinned here at its truncated form
    assert!((c5.c_mu - 0.0066480).abs() < 1e-7);
    assert!((1.0 / c5.c_mu - 150.4).abs() < 0.05);

    let id = link_constants(Link::IDENTITY, 3.0, 2.0, 1.0, 1.0).unwrap();
    assert_eq!((id.k_mu, id.c_mu), (1.0, 1.0));
    assert!(link_constants(Link::LOGISTIC, 0.0, 1.0, 0.5, 1.0).is_err());
}

#[test]
fn logistic_is_stable_in_the_tails() {
    let l = Link::LOGISTIC;
    for z in [-800.0, -40.0, -31.0, 31.0, 40.0, 800.0] {
        assert!(l.mu(z).is_finite() && (0.0..=1.0).contains(&l.mu(z)));
        assert!(l.dmu(z).is_finite() && l.dmu(z) >= 0.0);
        assert!(l.cumulant(z).is_finite());
    }
    assert_eq!(l.mu(800.0), 1.0);
    assert!(l.self_concordant() && Link::IDENTITY.self_concordant());
    for z in [-5.0, -0.3, 0.0, 2.0, 7.0] {
        assert!(l.ddmu(z).abs() <= l.dmu(z));
    }
}

#[test]
fn score_by_hand() {
    let mut h = WeightedHistory::new(2, 1.0, 1.0).unwrap();
    assert_eq!(glm_score(&h, Link::LOGISTIC, 1.0, &DVector::zeros(2)).unwrap(), DVector::zeros(2));
    h.push(&[1.0, 0.0], 1.0).unwrap();
    let s = glm_score(&h, Link::LOGISTIC, 1.0, &DVector::zeros(2)).unwrap();
    assert_eq!(s, DVector::from_vec(vec![-0.5, 0.0]));
}

#[test]
fn identity_link_reduces_to_ridge() {
    let mut rng = substream(21, 0);
    let mut h = WeightedHistory::new(3, 1.3, 0.9).unwrap();
    let mut design = DesignState::new(3, 1.3, 0.9, false).unwrap();
    for _ in 0..40 {
        let x = unit(3, &mut rng);
        let r: f64 = rng.sample(StandardNormal);
        h.push(&x, r).unwrap();
        design.update(&x, r).unwrap();
    }
    let ridge = design.ridge_solve().unwrap();
    let mle = glm_mle(&h, Link::IDENTITY, 1.0).unwrap();
    assert!((mle.theta - &ridge).amax() <= 1e-8);
    let score = glm_score(&h, Link::IDENTITY, 1.0, &ridge).unwrap();
    assert!(score.norm() <= 1e-8);
    // H = V for the identity link
    let hm = h_matrix(&h, Link::IDENTITY, 1.0, &DVector::zeros(3));
    assert!((hm - design.v()).amax() <= 1e-10);
    assert!(glm_mle(&WeightedHistory::new(3, 1.0, 0.9).unwrap(), Link::LOGISTIC, 0.5).unwrap().theta.norm() == 0.0);
}

#[test]
fn scalar_root_matches_bisection() {
    let mut h = WeightedHistory::new(1, 1.0, 1.0).unwrap();
    h.push(&[1.0], 1.0).unwrap();
    let l = Link::LOGISTIC;
    let root = bisect(|t| t + l.mu(t) - 1.0, -1.0, 1.0);
    let mle = glm_mle(&h, l, 1.0).unwrap();
    assert!((mle.theta[0] - root).abs() <= 1e-10);
    // θ = 1 − μ(θ) by hand: μ(0.40106) ≈ 0.59894
    assert!((root - 0.40106).abs() < 5e-6);
}

#[test]
fn solver_contract_on_random_instances() {
    let mut rng = substream(22, 0);
    for _ in 0..200 {
        let d = rng.random_range(1..=5);
        let n = rng.random_range(1..=200);
        let h = random_history(d, n, rng.random_range(0.9..1.0), rng.random_range(0.05..3.0), &mut rng);
        let c = rng.random_range(0.01..1.0);
        let mle = glm_mle(&h, Link::LOGISTIC, c).unwrap();
        let tol = 1e-9 * (1.0 + h.response().norm());
        let residual = glm_score(&h, Link::LOGISTIC, c, &mle.theta).unwrap().norm();
        assert!(residual <= tol, "residual {residual} > {tol}");
        for &(before, after) in &mle.damped_steps {
            assert!(after < before);
        }
    }
}

#[test]
fn finite_differences() {
    let mut rng = substream(23, 0);
    let h = random_history(3, 30, 0.95, 0.7, &mut rng);
    let (link, c) = (Link::LOGISTIC, 0.3);
    let eps = 1e-6;
    for _ in 0..100 {
        let theta = DVector::from_iterator(3, (0..3).map(|_| rng.random_range(-3.0..3.0)));
        let score = glm_score(&h, link, c, &theta).unwrap();
        let hess = h_matrix(&h, link, c, &theta);
        let mut jac = DMatrix::zeros(3, 3);
        for i in 0..3 {
            let mut e = DVector::zeros(3);
            e[i] = eps;
            let fd = (glm_objective(&h, link, c, &(&theta + &e)) - glm_objective(&h, link, c, &(&theta - &e))) / (2.0 * eps);
            assert!((fd - score[i]).abs() <= 1e-6 * (1.0 + score[i].abs()));
            let col = (glm_score(&h, link, c, &(&theta + &e)).unwrap() - glm_score(&h, link, c, &(&theta - &e)).unwrap())
                / (2.0 * eps);
            jac.set_column(i, &col);
        }
        assert!((jac - &hess).amax() <= 1e-6 * (1.0 + hess.amax()));
    }
}

#[test]
fn curvature_dominates_the_slope_bound() {
    let mut rng = substream(24, 0);
    let s = 2.0;
    let c = link_constants(Link::LOGISTIC, s, 1.0, 0.5, 1.0).unwrap().c_mu;
    let h = random_history(3, 25, 0.9, 1.0, &mut rng);
    let v = h.design_matrix();
    for _ in 0..100 {
        let u = unit(3, &mut rng);
        let r = s * rng.random::<f64>();
        let theta = DVector::from_iterator(3, u.into_iter().map(|a| a * r));
        let hm = h_matrix(&h, Link::LOGISTIC, c, &theta);
        assert!(min_eigenvalue(&(hm - &v * c)) >= -1e-9);
    }
}

fn outside_instance() -> (WeightedHistory, DVector<f64>, f64) {
    let mut h = WeightedHistory::new(2, 0.5, 0.95).unwrap();
    for (x, r) in [([1.0, 0.0], 1.0), ([0.8, 0.6], 1.0), ([0.0, 1.0], 1.0), ([0.6, -0.8], 1.0), ([1.0, 0.0], 1.0)] {
        h.push(&x, r).unwrap();
    }
    let c = 0.4;
    let theta_hat = glm_mle(&h, Link::LOGISTIC, c).unwrap().theta;
    (h, theta_hat, c)
}

#[test]
fn projections_beat_the_mesh() {
    let (h, theta_hat, c) = outside_instance();
    let s = 1.0;
    assert!(theta_hat.norm() > s);
    let pv = project_v(&theta_hat, &h, Link::LOGISTIC, c, s).unwrap();
    let ph = project_h(&theta_hat, &h, Link::LOGISTIC, c, s).unwrap();
    assert!(pv.norm() <= s * (1.0 + 1e-12) && ph.norm() <= s * (1.0 + 1e-12));
    let fv = projection_objective_v(&h, Link::LOGISTIC, c, &theta_hat, &pv).unwrap();
    let fh = projection_objective_h(&h, Link::LOGISTIC, c, &theta_hat, &ph).unwrap();
    let mut best_v = f64::INFINITY;
    let mut best_h = f64::INFINITY;
    for p in disc_mesh(s) {
        best_v = best_v.min(projection_objective_v(&h, Link::LOGISTIC, c, &theta_hat, &p).unwrap());
        best_h = best_h.min(projection_objective_h(&h, Link::LOGISTIC, c, &theta_hat, &p).unwrap());
    }
    assert!(fv <= best_v + 1e-4, "{fv} vs mesh {best_v}");
    assert!(fh <= best_h + 1e-4, "{fh} vs mesh {best_h}");
}

#[test]
fn projection_special_cases() {
    let (h, theta_hat, c) = outside_instance();
    // feasible input is returned untouched
    let inside = theta_hat.normalize() * 0.5;
    assert_eq!(project_v(&inside, &h, Link::LOGISTIC, c, 1.0).unwrap(), inside);
    assert_eq!(project_h(&inside, &h, Link::LOGISTIC, c, 1.0).unwrap(), inside);

    // empty identity history: g(θ) = λθ, so the projection is radial
    let empty = WeightedHistory::new(2, 2.0, 0.9).unwrap();
    let far = DVector::from_vec(vec![3.0, -4.0]);
    let radial = &far * (1.5 / 5.0);
    assert!((project_v(&far, &empty, Link::IDENTITY, 1.0, 1.5).unwrap() - &radial).amax() <= 1e-6);
    assert!((project_h(&far, &empty, Link::IDENTITY, 1.0, 1.5).unwrap() - &radial).amax() <= 1e-6);

    // identity link with c_μ = 1: both geometries coincide
    let mut rng = substream(25, 0);
    let mut h = WeightedHistory::new(2, 1.0, 0.9).unwrap();
    for _ in 0..10 {
        h.push(&unit(2, &mut rng), rng.random_range(-1.0..1.0)).unwrap();
    }
    let pv = project_v(&far, &h, Link::IDENTITY, 1.0, 1.0).unwrap();
    let ph = project_h(&far, &h, Link::IDENTITY, 1.0, 1.0).unwrap();
    assert!((pv - ph).amax() <= 1e-6);
}

#[test]
fn sandwich_pinned_values() {
    let l = Link::LOGISTIC;
    let (lo, mid, hi) = sc_sandwich(l, 0.0, 1.0);
    assert_relative_eq!(mid, l.mu(1.0) - l.mu(0.0), max_relative = 1e-9);
    assert!((mid - 0.23106).abs() < 5e-6);
    assert!((lo - 0.15803).abs() < 5e-6);
    assert!((hi - 0.42957).abs() < 5e-6);
    assert!(lo <= mid && mid <= hi);
    let (a, b, c) = sc_sandwich(l, 0.7, 0.7);
    assert_eq!((a, b, c), (l.dmu(0.7), l.dmu(0.7), l.dmu(0.7)));
}

#[test]
fn sandwich_holds_on_many_pairs() {
    let l = Link::LOGISTIC;
    let mut rng = substream(26, 0);
    for _ in 0..100_000 {
        let z1 = rng.random_range(-10.0..10.0);
        let z2 = rng.random_range(-10.0..10.0);
        let (lo, mid, hi) = sc_sandwich(l, z1, z2);
        let slack = 1e-9 * l.dmu(z1);
        assert!(lo <= mid + slack && mid <= hi + slack);
        assert!(mid + slack >= l.dmu(z1) / (1.0 + (z1 - z2).abs()));
    }
}

#[test]
fn mean_value_matrix_bounds() {
    let mut rng = substream(27, 0);
    let s = 3.0;
    for _ in 0..100 {
        let d = rng.random_range(1..=3);
        let h = random_history(d, rng.random_range(1..20), 0.9, rng.random_range(0.1..2.0), &mut rng);
        let c = rng.random_range(0.01..1.0);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng| {
            let u = unit(d, rng);
            let r = s * rng.random::<f64>();
            DVector::from_iterator(d, u.into_iter().map(|a| a * r))
        };
        let (t1, t2) = (draw(&mut rng), draw(&mut rng));
        let g = mean_value_matrix(&h, Link::LOGISTIC, c, &t1, &t2);
        // g(θ₁) − g(θ₂) = G(θ₁ − θ₂)
        let lhs = nsbandit::glm::g_map(&h, Link::LOGISTIC, c, &t1) - nsbandit::glm::g_map(&h, Link::LOGISTIC, c, &t2);
        assert!((lhs - &g * (&t1 - &t2)).amax() <= 1e-8);
        for t in [&t1, &t2] {
            let hm = h_matrix(&h, Link::LOGISTIC, c, t);
            assert!(min_eigenvalue(&(&g - hm / (1.0 + 2.0 * s))) >= -1e-8);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn projections_are_feasible(
        seed in any::<u64>(),
        s in 0.2f64..3.0,
        scale in 0.1f64..10.0,
        n in 1usize..15,
    ) {
        let mut rng = substream(seed, 0);
        let h = random_history(2, n, 0.9, 0.5, &mut rng);
        let theta = DVector::from_iterator(2, unit(2, &mut rng).into_iter().map(|a| a * scale));
        let pv = project_v(&theta, &h, Link::LOGISTIC, 0.2, s).unwrap();
        let ph = project_h(&theta, &h, Link::LOGISTIC, 0.2, s).unwrap();
        prop_assert!(pv.norm() <= s * (1.0 + 1e-12));
        prop_assert!(ph.norm() <= s * (1.0 + 1e-12));
        prop_assert_eq!(project_v(&pv, &h, Link::LOGISTIC, 0.2, s).unwrap(), pv.clone());
        prop_assert_eq!(project_h(&ph, &h, Link::LOGISTIC, 0.2, s).unwrap(), ph.clone());
    }

    #[test]
    fn merged_history_keeps_the_objective(
        pulls in prop::collection::vec((0usize..3, 0u8..2), 1..40),
    ) {
        // repeated arms merge; compare against a literal per-round sum
        let arms = [[1.0, 0.0], [0.6, 0.8], [0.0, -1.0]];
        let gamma = 0.9;
        let mut h = WeightedHistory::new(2, 1.0, gamma).unwrap();
        for &(a, r) in &pulls {
            h.push(&arms[a], r as f64).unwrap();
        }
        let theta = DVector::from_vec(vec![0.3, -0.7]);
        let t = pulls.len();
        let mut want = 0.5 * 0.5 * theta.norm_squared();
        for (s, &(a, r)) in pulls.iter().enumerate() {
            let w = gamma.powi((t - 1 - s) as i32);
            let z = arms[a][0] * theta[0] + arms[a][1] * theta[1];
            want += w * (Link::LOGISTIC.cumulant(z) - r as f64 * z);
        }
        prop_assert!((glm_objective(&h, Link::LOGISTIC, 0.5, &theta) - want).abs() <= 1e-10 * (1.0 + want.abs()));
    }
}
