//! Ground-truth parameter trajectories, arm sets, reward sampling and
//! regret accounting.

use std::io::{BufRead, Write};

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::Link;
use crate::linalg::{dot, norm2};

/// Independent random stream `stream` of the generator seeded with `seed`.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    Rotating,
    Piecewise,
    Stationary,
    Custom,
}

/// Parameter sequence `θ_1..θ_T` (stored 0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    thetas: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(kind: TrajectoryKind, thetas: Vec<Vec<f64>>) -> Result<Self> {
        let first = thetas.first().ok_or_else(|| Error::InvalidParameter("empty trajectory".into()))?;
        let d = first.len();
        if d == 0 {
            return Err(Error::InvalidParameter("zero-dimensional trajectory".into()));
        }
        for t in &thetas {
            Error::check_dim(d, t.len())?;
        }
        Ok(Self { kind, thetas })
    }

    pub fn constant(theta: Vec<f64>, horizon: usize) -> Result<Self> {
        Self::new(TrajectoryKind::Stationary, vec![theta; horizon.max(1)])
    }

    pub fn horizon(&self) -> usize {
        self.thetas.len()
    }

    pub fn dim(&self) -> usize {
        self.thetas[0].len()
    }

    /// `θ_t` for 1-based round `t`.
    pub fn at(&self, t: usize) -> &[f64] {
        &self.thetas[t - 1]
    }

    pub fn thetas(&self) -> &[Vec<f64>] {
        &self.thetas
    }

    pub fn max_norm(&self) -> f64 {
        self.thetas.iter().map(|t| norm2(t)).fold(0.0, f64::max)
    }

    pub fn write_text<W: Write>(&self, out: W) -> Result<()> {
        write_matrix(&self.thetas, out)
    }

    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        Self::new(TrajectoryKind::Custom, read_matrix(input)?)
    }
}

/// `θ_t = S·(cos 2π(t−1)/T, sin 2π(t−1)/T, 0, …)`: one full counterclockwise
/// revolution starting from `S·e₁`.
pub fn rotating_trajectory(d: usize, horizon: usize, s: f64) -> Result<Trajectory> {
    if d < 2 {
        return Err(Error::InvalidParameter("rotation needs d ≥ 2".into()));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let thetas = (0..horizon)
        .map(|k| {
            let angle = 2.0 * std::f64::consts::PI * k as f64 / horizon as f64;
            let mut v = vec![0.0; d];
            v[0] = s * angle.cos();
            v[1] = s * angle.sin();
            v
        })
        .collect();
    Trajectory::new(TrajectoryKind::Rotating, thetas)
}

fn random_direction<R: Rng>(d: usize, scale: f64, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm2(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x * scale / n).collect();
        }
    }
}

/// Piecewise-constant trajectory with exactly `changes` switches, placed
/// uniformly without replacement in rounds `2..=T`; each segment holds a
/// uniformly random direction of norm `S`.
pub fn piecewise_trajectory(d: usize, horizon: usize, changes: usize, s: f64, seed: u64) -> Result<Trajectory> {
    if horizon == 0 || changes >= horizon {
        return Err(Error::InvalidParameter(format!(
            "need 0 ≤ changes < T (changes={changes}, T={horizon})"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points: Vec<usize> = index::sample(&mut rng, horizon - 1, changes).into_iter().map(|i| i + 2).collect();
    points.sort_unstable();
    let mut thetas = Vec::with_capacity(horizon);
    let mut current = random_direction(d, s, &mut rng);
    let mut next_change = points.iter().peekable();
    for t in 1..=horizon {
        if next_change.peek() == Some(&&t) {
            next_change.next();
            let mut fresh = random_direction(d, s, &mut rng);
            while fresh == current {
                fresh = random_direction(d, s, &mut rng);
            }
            current = fresh;
        }
        thetas.push(current.clone());
    }
    Trajectory::new(TrajectoryKind::Piecewise, thetas)
}

/// `P_T = Σ_{t=2}^{T} ‖θ_{t−1} − θ_t‖₂`.
pub fn path_length(traj: &Trajectory) -> f64 {
    traj.thetas
        .windows(2)
        .map(|w| w[0].iter().zip(&w[1]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .sum()
}

/// Number of rounds `t` with `θ_t ≠ θ_{t−1}`.
pub fn change_count(traj: &Trajectory) -> usize {
    traj.thetas.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Finite arm set with norms bounded by `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmSet {
    arms: Vec<Vec<f64>>,
    bound: f64,
}

impl ArmSet {
    pub fn new(arms: Vec<Vec<f64>>, bound: f64) -> Result<Self> {
        let d = arms.first().ok_or(Error::EmptyArmSet)?.len();
        for a in &arms {
            Error::check_dim(d, a.len())?;
            let n = norm2(a);
            if n > bound * (1.0 + 1e-12) {
                return Err(Error::InvalidParameter(format!("arm norm {n} exceeds bound {bound}")));
            }
        }
        Ok(Self { arms, bound })
    }

    pub fn len(&self) -> usize {
        self.arms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arms.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.arms[0].len()
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn get(&self, i: usize) -> &[f64] {
        &self.arms[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.arms.iter().map(Vec::as_slice)
    }

    pub fn write_text<W: Write>(&self, out: W) -> Result<()> {
        write_matrix(&self.arms, out)
    }

    /// Reads arms and uses the largest norm as the bound.
    pub fn read_text<R: BufRead>(input: R) -> Result<Self> {
        let arms = read_matrix(input)?;
        let bound = arms.iter().map(|a| norm2(a)).fold(0.0, f64::max);
        Self::new(arms, bound)
    }
}

/// `n` standard-normal vectors rescaled to norm exactly `L`.
pub fn sample_arms(n: usize, d: usize, l: f64, seed: u64) -> Result<ArmSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_arms_with(n, d, l, &mut rng)
}

pub fn sample_arms_with<R: Rng>(n: usize, d: usize, l: f64, rng: &mut R) -> Result<ArmSet> {
    if n == 0 {
        return Err(Error::EmptyArmSet);
    }
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let arms = (0..n).map(|_| random_direction(d, l, rng)).collect();
    ArmSet::new(arms, l)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RewardModel {
    /// `r = xᵀθ + N(0, R²)`
    LinearGaussian { noise_std: f64 },
    /// `r ~ Bernoulli(μ(xᵀθ))` with the logistic link.
    BernoulliLogistic,
}

impl RewardModel {
    pub fn mean(&self, x: &[f64], theta: &[f64]) -> f64 {
        let z = dot(x, theta);
        match self {
            RewardModel::LinearGaussian { .. } => z,
            RewardModel::BernoulliLogistic => Link::LOGISTIC.mu(z),
        }
    }
}

pub fn draw_reward<R: Rng>(model: &RewardModel, x: &[f64], theta: &[f64], rng: &mut R) -> f64 {
    let mean = model.mean(x, theta);
    match model {
        RewardModel::LinearGaussian { noise_std } => {
            let eta: f64 = rng.sample(StandardNormal);
            mean + noise_std * eta
        }
        RewardModel::BernoulliLogistic => {
            let coin = Bernoulli::new(mean.clamp(0.0, 1.0)).expect("probability in [0, 1]");
            if coin.sample(rng) {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Gap between the best arm's mean reward and the chosen arm's.
pub fn instantaneous_regret(model: &RewardModel, arms: &ArmSet, theta: &[f64], chosen: usize) -> f64 {
    let best = arms.iter().map(|x| model.mean(x, theta)).fold(f64::NEG_INFINITY, f64::max);
    (best - model.mean(arms.get(chosen), theta)).max(0.0)
}

/// One row per vector, space-separated, shortest round-trip decimals.
pub fn write_matrix<W: Write>(rows: &[Vec<f64>], mut out: W) -> Result<()> {
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

pub fn read_matrix<R: BufRead>(input: R) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row = trimmed
            .split_whitespace()
            .map(|tok| tok.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first().map(|r: &Vec<f64>| r.len()) {
            if first != row.len() {
                return Err(Error::Parse(format!("line {}: expected {first} columns", lineno + 1)));
            }
        }
        rows.push(row);
    }
    Ok(rows)
}
