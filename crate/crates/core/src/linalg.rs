//! Small dense helpers on top of `nalgebra`: a Cholesky factor that exposes
//! allocation-free Mahalanobis norms, and eigenvalue shortcuts used by the
//! invariant checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower Cholesky factor `L` of an SPD matrix `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    l: DMatrix<f64>,
}

impl SpdFactor {
    pub fn new(m: &DMatrix<f64>) -> Result<Self> {
        let chol = m.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        Ok(Self { l: chol.unpack() })
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    /// `out = L⁻¹ x` by forward substitution.
    pub fn forward(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = x[i];
            for k in 0..i {
                acc -= self.l[(i, k)] * out[k];
            }
            out[i] = acc / self.l[(i, i)];
        }
    }

    /// `out = L⁻ᵀ y` by back substitution (in place).
    pub fn backward(&self, y: &mut [f64]) {
        let n = self.dim();
        for i in (0..n).rev() {
            let mut acc = y[i];
            for k in (i + 1)..n {
                acc -= self.l[(k, i)] * y[k];
            }
            y[i] = acc / self.l[(i, i)];
        }
    }

    /// `M⁻¹ b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut out = vec![0.0; self.dim()];
        self.forward(b.as_slice(), &mut out);
        self.backward(&mut out);
        DVector::from_vec(out)
    }

    /// `xᵀ M⁻¹ x`, using `scratch` (length ≥ dim) as workspace.
    pub fn inv_quad_with(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let n = self.dim();
        self.forward(x, &mut scratch[..n]);
        scratch[..n].iter().map(|v| v * v).sum()
    }

    pub fn inv_quad(&self, x: &[f64]) -> f64 {
        let mut scratch = vec![0.0; self.dim()];
        self.inv_quad_with(x, &mut scratch)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.l[(i, i)].ln()).sum::<f64>()
    }
}

/// `xᵀ M x` for a square matrix stored column-major.
pub fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = m.nrows();
    let mut acc = 0.0;
    for j in 0..n {
        let mut col = 0.0;
        for i in 0..n {
            col += m[(i, j)] * x[i];
        }
        acc += col * x[j];
    }
    acc
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn max_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean projection onto the ball `{|θ|₂ ≤ radius}`.
pub fn project_ball(theta: &DVector<f64>, radius: f64) -> DVector<f64> {
    let n = theta.norm();
    if n <= radius {
        theta.clone()
    } else {
        theta * (radius / n)
    }
}
