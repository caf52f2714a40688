//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero when any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use nsbandit::confidence::{default_lambda, tune_gamma, RadiusParams, Setting};
use nsbandit::design::{design_rebuild, potential_bound, DesignState, NormKind};
use nsbandit::env::{draw_reward, sample_arms, substream, RewardModel};
use nsbandit::glm::{glm_mle, glm_score, h_matrix, link_constants, mean_value_matrix, sc_sandwich, Link, WeightedHistory};
use nsbandit::harness::bench::{bench_config, run_bench};
use nsbandit::harness::runner::RunOutput;
use nsbandit::harness::{run_experiment, ExperimentConfig};
use nsbandit::linalg::{min_eigenvalue, norm2};
use nsbandit::policy::{LinUcb, Policy, PolicyKind};
use nsbandit::Result;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { passed, detail })
}

fn unit<R: Rng>(d: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm2(&v);
    v.into_iter().map(|x| x / n).collect()
}

fn in_ball<R: Rng>(d: usize, radius: f64, rng: &mut R) -> DVector<f64> {
    let u = unit(d, rng);
    let r = radius * rng.random::<f64>().sqrt();
    DVector::from_iterator(d, u.into_iter().map(|x| x * r))
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// Mean final regret per policy label, in config order.
fn mean_finals(cfg: &ExperimentConfig, run: &RunOutput) -> Vec<(String, f64)> {
    cfg.policies
        .iter()
        .map(|p| {
            let name = p.display_name();
            let xs: Vec<f64> =
                run.outcomes.iter().filter(|o| o.policy == name).map(|o| o.final_regret).collect();
            (name, xs.iter().sum::<f64>() / xs.len() as f64)
        })
        .collect()
}

fn recursion_oracle() -> Result<Outcome> {
    let start = Instant::now();
    let mut rng = substream(11, 0);
    let d = 4;
    let mut worst = 0.0f64;
    for gamma in [0.5, 0.9, 0.99, 1.0] {
        let mut state = DesignState::new(d, 1.5, gamma, true)?;
        let mut hist = Vec::with_capacity(1000);
        for _ in 0..1000 {
            let scale = rng.random_range(0.0..2.0);
            let x: Vec<f64> = unit(d, &mut rng).into_iter().map(|v| v * scale).collect();
            let r: f64 = rng.sample(StandardNormal);
            state.update(&x, r)?;
            hist.push((x, r));
        }
        let (v, b) = design_rebuild(&hist, d, 1.5, gamma);
        worst = worst.max((state.v() - v).amax()).max((state.b() - b).amax());
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-8 && elapsed < Duration::from_secs(5),
        format!("max abs error {worst:.2e}, {:.3} s", elapsed.as_secs_f64()),
    )
}

fn solver_contract() -> Result<Outcome> {
    let mut rng = substream(12, 0);
    let link = Link::LOGISTIC;
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let d = rng.random_range(1..=5);
        let t = rng.random_range(1..=200);
        let lambda = rng.random_range(0.05..5.0);
        let gamma = rng.random_range(0.5..=1.0);
        let s = rng.random_range(0.5..6.0);
        let c_mu = link_constants(link, s, 1.0, 0.5, 1.0)?.c_mu;
        let truth = in_ball(d, s, &mut rng);
        let arms = sample_arms(rng.random_range(1..=20), d, 1.0, rng.random())?;
        let mut hist = WeightedHistory::new(d, lambda, gamma)?;
        for _ in 0..t {
            let x = arms.get(rng.random_range(0..arms.len()));
            let r = draw_reward(&RewardModel::BernoulliLogistic, x, truth.as_slice(), &mut rng);
            hist.push(x, r)?;
        }
        let out = glm_mle(&hist, link, c_mu)?;
        let score = glm_score(&hist, link, c_mu, &out.theta)?;
        let mut signal = DVector::zeros(d);
        for (x, _, wr) in hist.iter() {
            signal += DVector::from_column_slice(x) * wr;
        }
        worst = worst.max(score.norm() / (1e-9 * (1.0 + signal.norm())));
    }
    // one observation x = 1, r = 1, λc = 1: root of θ + μ(θ) − 1
    let mut one = WeightedHistory::new(1, 1.0, 1.0)?;
    one.push(&[1.0], 1.0)?;
    let root = glm_mle(&one, link, 1.0)?.theta[0];
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid + link.mu(mid) - 1.0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let gap = (root - 0.5 * (lo + hi)).abs();
    outcome(
        worst <= 1.0 && gap <= 1e-10,
        format!("worst residual / tolerance {worst:.3}, scalar root gap {gap:.1e}"),
    )
}

fn inequality_suite() -> Result<Outcome> {
    // potential and determinant on simulated LB-WeightUCB runs
    let mut runs_ok = true;
    let mut tightest = 0.0f64;
    let horizon = 2000;
    for (i, gamma) in [0.9, 0.97712, 0.99, 0.999, 1.0].into_iter().enumerate() {
        for trial in 0..4u64 {
            let seed = 100 * i as u64 + trial;
            let arms = sample_arms(50, 2, 1.0, seed)?;
            let params = RadiusParams {
                gamma,
                lambda: 2.0,
                d: 2,
                s: 1.0,
                l: 1.0,
                r: 1.0,
                m: 1.0,
                c_mu: 1.0,
                k_mu: 1.0,
                delta: 1.0 / horizon as f64,
                lookback: 1,
            };
            let mut policy = LinUcb::new(PolicyKind::LbWeight, params)?;
            let mut rng = substream(seed, 1);
            let mut potential = 0.0;
            for t in 0..horizon {
                let angle = std::f64::consts::TAU * t as f64 / horizon as f64;
                let theta = [angle.cos(), angle.sin()];
                let x = arms.get(policy.select(&arms)?.arm);
                potential += policy.design().mnorm(x, NormKind::V)?.powi(2);
                let r = draw_reward(&RewardModel::LinearGaussian { noise_std: 1.0 }, x, &theta, &mut rng);
                policy.observe(x, r)?;
                let design = policy.design();
                runs_ok &= design.v().determinant() <= design.determinant_bound(1.0) * (1.0 + 1e-12);
            }
            let bound = potential_bound(horizon, gamma, 2.0, 1.0, 2);
            runs_ok &= potential <= bound;
            tightest = tightest.max(potential / bound);
        }
    }

    let link = Link::LOGISTIC;
    let mut rng = substream(13, 0);
    let mut sandwich_ok = true;
    for _ in 0..100_000 {
        let z1 = rng.random_range(-12.0..12.0);
        let z2 = rng.random_range(-12.0..12.0);
        let (lo, mid, hi) = sc_sandwich(link, z1, z2);
        let tol = 1e-9 * link.dmu(z1);
        sandwich_ok &= lo <= mid + tol && mid <= hi + tol && mid + tol >= link.dmu(z1) / (1.0 + (z1 - z2).abs());
    }

    let mut min_eig = f64::INFINITY;
    for _ in 0..100 {
        let d = rng.random_range(1..=4);
        let s = rng.random_range(0.5..5.0);
        let c_mu = link_constants(link, s, 1.0, 0.5, 1.0)?.c_mu;
        let mut hist = WeightedHistory::new(d, rng.random_range(0.1..3.0), rng.random_range(0.8..=1.0))?;
        for _ in 0..rng.random_range(1..=30) {
            hist.push(&unit(d, &mut rng), rng.random_range(0..2) as f64)?;
        }
        let (t1, t2) = (in_ball(d, s, &mut rng), in_ball(d, s, &mut rng));
        let g = mean_value_matrix(&hist, link, c_mu, &t1, &t2);
        for t in [&t1, &t2] {
            let h = h_matrix(&hist, link, c_mu, t);
            min_eig = min_eig.min(min_eigenvalue(&(&g - h / (1.0 + 2.0 * s))));
        }
    }
    outcome(
        runs_ok && sandwich_ok && min_eig >= -1e-8,
        format!(
            "runs ok {runs_ok} (largest potential/bound {tightest:.3}), sandwich ok {sandwich_ok}, mean-value min eig {min_eig:.2e}"
        ),
    )
}

fn coverage() -> Result<Outcome> {
    let start = Instant::now();
    let (horizon, d, trials, delta) = (200usize, 2usize, 1000usize, 0.05);
    let gamma = tune_gamma(Setting::Lb, horizon, d, 0.0, 1.0, 1.0)?;
    let params = RadiusParams {
        gamma,
        lambda: default_lambda(Setting::Lb, d, horizon, 1.0),
        d,
        s: 1.0,
        l: 1.0,
        r: 1.0,
        m: 1.0,
        c_mu: 1.0,
        k_mu: 1.0,
        delta,
        lookback: 1,
    };
    let model = RewardModel::LinearGaussian { noise_std: 1.0 };
    let mut failures = 0usize;
    for trial in 0..trials as u64 {
        let seed = 40_000 + trial;
        let arms = sample_arms(50, d, 1.0, seed)?;
        let theta = DVector::from_vec(unit(d, &mut substream(seed, 1)));
        let mut rng = substream(seed, 100);
        let mut policy = LinUcb::new(PolicyKind::LbWeight, params)?;
        let mut covered = true;
        for _ in 0..horizon {
            let x = arms.get(policy.select(&arms)?.arm);
            let r = draw_reward(&model, x, theta.as_slice(), &mut rng);
            policy.observe(x, r)?;
            let err = policy.estimate().expect("linear estimate") - &theta;
            let norm = (err.transpose() * policy.design().v() * &err)[(0, 0)].max(0.0).sqrt();
            covered &= norm <= policy.beta();
        }
        failures += usize::from(!covered);
    }
    let rate = failures as f64 / trials as f64;
    let allowed = delta + 3.0 * (delta * (1.0 - delta) / trials as f64).sqrt();
    let elapsed = start.elapsed();
    outcome(
        rate <= allowed && elapsed < Duration::from_secs(120),
        format!("failure rate {rate:.3} (allowed {allowed:.4}), {:.1} s", elapsed.as_secs_f64()),
    )
}

fn rotating_comparison() -> Result<Outcome> {
    let start = Instant::now();
    let mut cfg = bench_config(6000, 2, 50, 20, 5000);
    cfg.record_timing = false;
    cfg.policies.retain(|p| matches!(p.kind, PolicyKind::LbWeight | PolicyKind::DLinucb | PolicyKind::Oful));
    let run = run_experiment(&cfg)?;
    let means = mean_finals(&cfg, &run);
    let (lb, dl, oful) = (means[0].1, means[1].1, means[2].1);
    let gap = (lb - dl).abs() / dl;
    let elapsed = start.elapsed();
    outcome(
        gap <= 0.15 && lb <= 0.6 * oful && dl <= 0.6 * oful && elapsed < Duration::from_secs(600),
        format!(
            "LB-WeightUCB {lb:.1}, D-LinUCB {dl:.1} (gap {:.1}%), OFUL {oful:.1}, {:.1} s",
            100.0 * gap,
            elapsed.as_secs_f64()
        ),
    )
}

fn efficiency() -> Result<Outcome> {
    let report = run_bench(&bench_config(6000, 2, 50, 3, 1))?;
    let ns = |name: &str| report.rows.iter().find(|r| r.policy == name).map(|r| r.mean_ns_per_round).unwrap_or(f64::NAN);
    outcome(
        report.ratio >= 1.3,
        format!(
            "D-LinUCB / LB-WeightUCB time ratio {:.3} ({:.0} vs {:.0} ns/round)",
            report.ratio,
            ns("D-LinUCB"),
            ns("LB-WeightUCB")
        ),
    )
}

fn logistic_large_norm() -> Result<Outcome> {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::load(&configs_dir().join("logistic_s5.toml"))?;
    cfg.record_timing = false;
    let run = run_experiment(&cfg)?;
    let means = mean_finals(&cfg, &run);
    let get = |kind: PolicyKind| {
        cfg.policies.iter().position(|p| p.kind == kind).map(|k| means[k].1).unwrap_or(f64::NAN)
    };
    let (scb, glb) = (get(PolicyKind::ScbWeight), get(PolicyKind::GlbWeight));
    let elapsed = start.elapsed();
    outcome(
        cfg.n_trials == 20 && scb < glb && elapsed < Duration::from_secs(1200),
        format!("SCB-WeightUCB {scb:.1} vs GLB-WeightUCB {glb:.1} over {} trials, {:.1} s", cfg.n_trials, elapsed.as_secs_f64()),
    )
}

fn regret_scaling() -> Result<Outcome> {
    let horizons = [1000usize, 2000, 4000, 8000];
    let mut points = Vec::new();
    for (i, &t) in horizons.iter().enumerate() {
        let mut cfg = bench_config(t, 2, 50, 10, 7000 + 100 * i as u64);
        cfg.record_timing = false;
        cfg.policies.retain(|p| p.kind == PolicyKind::LbWeight);
        let run = run_experiment(&cfg)?;
        points.push(((t as f64).ln(), mean_finals(&cfg, &run)[0].1));
    }
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let regrets: Vec<String> = points.iter().map(|p| format!("{:.1}", p.1)).collect();
    outcome(
        (0.60..=0.90).contains(&slope),
        format!("slope {slope:.3}, mean regrets [{}]", regrets.join(", ")),
    )
}

fn piecewise_self_concordant() -> Result<Outcome> {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::load(&configs_dir().join("piecewise_scb.toml"))?;
    cfg.record_timing = false;
    let run = run_experiment(&cfg)?;
    let means = mean_finals(&cfg, &run);
    let get = |kind: PolicyKind| {
        cfg.policies.iter().position(|p| p.kind == kind).map(|k| means[k].1).unwrap_or(f64::NAN)
    };
    let (pw, glm, fixed) = (get(PolicyKind::ScbPwWeight), get(PolicyKind::GlmUcb), get(PolicyKind::FixedArm));
    let violation = run
        .outcomes
        .iter()
        .filter(|o| o.policy == PolicyKind::ScbPwWeight.label())
        .map(|o| o.max_witness_violation)
        .fold(0.0f64, f64::max);
    outcome(
        pw < fixed && pw < glm && violation <= 1e-6,
        format!(
            "SCB-PW-WeightUCB {pw:.1}, GLM-UCB {glm:.1}, fixed arm {fixed:.1}, worst witness violation {violation:.1e}, {:.1} s",
            elapsed_secs(start)
        ),
    )
}

fn elapsed_secs(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

const DETERMINISM_CONFIG: &str = r#"
setting = "SCB"
T = 300
d = 3
n_arms = 12
n_trials = 4
base_seed = 99

[environment]
kind = "piecewise"
changes = 3
resample_arms = true

[[policy]]
kind = "scb_weight"

[[policy]]
kind = "glb_weight"

[[policy]]
kind = "glm_ucb"

[[policy]]
kind = "fixed_arm"
arm = 2
"#;

fn determinism() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let cfg = dir.path().join("det.toml");
    std::fs::write(&cfg, DETERMINISM_CONFIG)?;
    let mut outputs = Vec::new();
    for (i, threads) in ["1", "1", "4"].into_iter().enumerate() {
        let out = dir.path().join(format!("out{i}"));
        let status = Command::new(env!("CARGO_BIN_EXE_nsbandit"))
            .args(["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--no-timing"])
            .env("NSBANDIT_THREADS", threads)
            .output()?;
        if !status.status.success() {
            return outcome(false, format!("run failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        outputs.push(std::fs::read(out.join("records.csv"))?);
    }
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    outcome(
        same && !outputs[0].is_empty(),
        format!("{} CSV bytes, identical across repeated and multi-threaded runs: {same}", outputs[0].len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Result<Outcome>); 10] = [
        ("recursive design matches closed form", recursion_oracle),
        ("logistic solver contract", solver_contract),
        ("potential, determinant and self-concordance inequalities", inequality_suite),
        ("confidence coverage", coverage),
        ("rotating linear comparison", rotating_comparison),
        ("weighted vs two-matrix wall time", efficiency),
        ("logistic S = 5: SCB beats GLB", logistic_large_norm),
        ("regret scaling exponent", regret_scaling),
        ("piecewise self-concordant policy", piecewise_self_concordant),
        ("byte-identical output", determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.into_iter().enumerate() {
        let result = run().unwrap_or_else(|e| Outcome { passed: false, detail: format!("error: {e}") });
        let tag = if result.passed { "PASS" } else { "FAIL" };
        println!("{tag} criterion {}: {name}: {}", i + 1, result.detail);
        failed += usize::from(!result.passed);
    }
    if failed > 0 {
        println!("{failed} of 10 criteria failed");
        std::process::exit(1);
    }
    println!("all 10 criteria passed");
}
