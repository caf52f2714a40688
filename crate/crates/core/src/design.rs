//! Exponentially discounted design matrices.
//!
//! `V_t = λI + Σ_{s≤t} γ^{t−s} x_s x_sᵀ` and `b_t = Σ_{s≤t} γ^{t−s} r_s x_s` are
//! maintained by the recursion
//!
//! ```text
//!   V ← γV + xxᵀ + (1−γ)λI
//!   b ← γb + r·x
//!   Ṽ ← γ²Ṽ + xxᵀ + (1−γ²)λI      (only when tracked)
//! ```
//!
//! so that after `t` updates [`DesignState::ridge_solve`] returns the
//! estimate used at round `t + 1`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;

/// Which matrix the Mahalanobis norm is taken under.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    /// `‖x‖_{V⁻¹}`
    V,
    /// `‖x‖_{Ṽ⁻¹}`
    Vtilde,
    /// `‖x‖_{V⁻¹ṼV⁻¹}`
    Sandwich,
}

#[derive(Debug, Clone)]
pub struct DesignState {
    dim: usize,
    gamma: f64,
    lambda: f64,
    round: usize,
    v: DMatrix<f64>,
    vtilde: Option<DMatrix<f64>>,
    b: DVector<f64>,
}

impl DesignState {
    pub fn new(dim: usize, lambda: f64, gamma: f64, track_vtilde: bool) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        let v = DMatrix::identity(dim, dim) * lambda;
        Ok(Self {
            dim,
            gamma,
            lambda,
            round: 0,
            vtilde: track_vtilde.then(|| v.clone()),
            v,
            b: DVector::zeros(dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Number of observed pairs.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }

    pub fn vtilde(&self) -> Option<&DMatrix<f64>> {
        self.vtilde.as_ref()
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn update(&mut self, x: &[f64], r: f64) -> Result<()> {
        Error::check_dim(self.dim, x.len())?;
        let d = self.dim;
        let g = self.gamma;
        let shrink = (1.0 - g) * self.lambda;
        for j in 0..d {
            for i in 0..d {
                self.v[(i, j)] = g * self.v[(i, j)] + x[i] * x[j];
            }
            self.v[(j, j)] += shrink;
            self.b[j] = g * self.b[j] + r * x[j];
        }
        symmetrize(&mut self.v);
        if let Some(vt) = self.vtilde.as_mut() {
            let g2 = g * g;
            let shrink2 = (1.0 - g2) * self.lambda;
            for j in 0..d {
                for i in 0..d {
                    vt[(i, j)] = g2 * vt[(i, j)] + x[i] * x[j];
                }
                vt[(j, j)] += shrink2;
            }
            symmetrize(vt);
        }
        self.round += 1;
        Ok(())
    }

    pub fn factor(&self) -> Result<SpdFactor> {
        SpdFactor::new(&self.v)
    }

    /// `V⁻¹ b` through a Cholesky factorization.
    pub fn ridge_solve(&self) -> Result<DVector<f64>> {
        Ok(self.factor()?.solve(&self.b))
    }

    pub fn mnorm(&self, x: &[f64], which: NormKind) -> Result<f64> {
        Error::check_dim(self.dim, x.len())?;
        match which {
            NormKind::V => Ok(self.factor()?.inv_quad(x).max(0.0).sqrt()),
            NormKind::Vtilde => {
                let vt = self.vtilde.as_ref().ok_or(Error::VtildeNotTracked)?;
                Ok(SpdFactor::new(vt)?.inv_quad(x).max(0.0).sqrt())
            }
            NormKind::Sandwich => {
                let vt = self.vtilde.as_ref().ok_or(Error::VtildeNotTracked)?;
                let z = self.factor()?.solve(&DVector::from_column_slice(x));
                Ok(crate::linalg::quad_form(vt, z.as_slice()).max(0.0).sqrt())
            }
        }
    }

    /// `Σ_{s≤t} γ^{t−s}` for the current round.
    pub fn discount_mass(&self) -> f64 {
        discount_mass(self.gamma, self.round)
    }

    /// Upper bound `(λ + L²·Σγ^{t−s}/d)^d` on `det(V_t)`.
    pub fn determinant_bound(&self, arm_bound: f64) -> f64 {
        (self.lambda + arm_bound * arm_bound * self.discount_mass() / self.dim as f64)
            .powi(self.dim as i32)
    }
}

/// `Σ_{k<n} γ^k`.
pub fn discount_mass(gamma: f64, n: usize) -> f64 {
    if gamma == 1.0 {
        n as f64
    } else {
        (1.0 - gamma.powi(n as i32)) / (1.0 - gamma)
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Closed-form construction of `(V, b)` from a raw history, weighting pair
/// `s` (1-based) by `γ^{n−s}` where `n = history.len()`.
pub fn design_rebuild(
    history: &[(Vec<f64>, f64)],
    dim: usize,
    lambda: f64,
    gamma: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = history.len();
    let mut v = DMatrix::identity(dim, dim) * lambda;
    let mut b = DVector::zeros(dim);
    for (s, (x, r)) in history.iter().enumerate() {
        let w = gamma.powi((n - 1 - s) as i32);
        let xv = DVector::from_column_slice(x);
        v += &xv * xv.transpose() * w;
        b += xv * (w * r);
    }
    (v, b)
}

/// Weighted elliptical potential bound
/// `2·max{1, L²/λ}·d·(T·log(1/γ) + log(1 + L²/(λd(1−γ))))`.
///
/// At `γ = 1` the second logarithm is replaced by the undiscounted
/// `log(1 + L²T/(λd))`.
pub fn potential_bound(horizon: usize, gamma: f64, lambda: f64, arm_bound: f64, dim: usize) -> f64 {
    let t = horizon as f64;
    let d = dim as f64;
    let l2 = arm_bound * arm_bound;
    let lead = 2.0 * (l2 / lambda).max(1.0) * d;
    let tail = if gamma >= 1.0 {
        (1.0 + l2 * t / (lambda * d)).ln()
    } else {
        t * (1.0 / gamma).ln() + (1.0 + l2 / (lambda * d * (1.0 - gamma))).ln()
    };
    lead * tail
}
