use std::collections::VecDeque;

use nalgebra::DVector;

use super::{argmax, Policy, PolicyKind, Selection};
use crate::confidence::{beta_lb, RadiusParams};
use crate::design::{design_rebuild, DesignState};
use crate::env::ArmSet;
use crate::error::{Error, Result};
use crate::linalg::{dot, quad_form, SpdFactor};

/// Optimistic linear policy on a discounted design matrix.
///
/// * `LbWeight`: `xᵀθ̂ + β‖x‖_{V⁻¹}` with `γ < 1`.
/// * `Oful`: the same criterion with `γ = 1`.
/// * `DLinucb`: `xᵀθ̂ + β‖x‖_{V⁻¹ṼV⁻¹}`, which needs the second matrix `Ṽ`.
#[derive(Debug, Clone)]
pub struct LinUcb {
    kind: PolicyKind,
    params: RadiusParams,
    design: DesignState,
    factor: SpdFactor,
    theta: DVector<f64>,
    beta: f64,
}

impl LinUcb {
    pub fn new(kind: PolicyKind, params: RadiusParams) -> Result<Self> {
        if !matches!(kind, PolicyKind::LbWeight | PolicyKind::Oful | PolicyKind::DLinucb) {
            return Err(Error::InvalidParameter(format!("{kind} is not a discounted LinUCB variant")));
        }
        params.validate()?;
        let design =
            DesignState::new(params.d, params.lambda, params.gamma, kind == PolicyKind::DLinucb)?;
        let factor = design.factor()?;
        Ok(Self {
            kind,
            params,
            theta: DVector::zeros(params.d),
            beta: beta_lb(0, &params),
            design,
            factor,
        })
    }

    pub fn design(&self) -> &DesignState {
        &self.design
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn params(&self) -> &RadiusParams {
        &self.params
    }

    /// Exploration width of `x` under the policy's norm.
    pub fn width(&self, x: &[f64], scratch: &mut [f64]) -> f64 {
        let d = self.params.d;
        let sq = match self.design.vtilde() {
            Some(vt) => {
                self.factor.forward(x, &mut scratch[..d]);
                self.factor.backward(&mut scratch[..d]);
                quad_form(vt, &scratch[..d])
            }
            None => self.factor.inv_quad_with(x, scratch),
        };
        sq.max(0.0).sqrt()
    }
}

impl Policy for LinUcb {
    fn kind(&self) -> PolicyKind {
        self.kind
    }

    fn select(&self, arms: &ArmSet) -> Result<Selection> {
        Error::check_dim(self.params.d, arms.dim())?;
        let mut scratch = vec![0.0; self.params.d];
        let theta = self.theta.as_slice();
        let values = arms.iter().map(|x| dot(x, theta) + self.beta * self.width(x, &mut scratch));
        argmax(values).map(Selection::arm)
    }

    fn observe(&mut self, x: &[f64], r: f64) -> Result<()> {
        self.design.update(x, r)?;
        self.factor = self.design.factor()?;
        self.theta = self.factor.solve(self.design.b());
        self.beta = beta_lb(self.design.round(), &self.params);
        Ok(())
    }

    fn round(&self) -> usize {
        self.design.round()
    }

    fn estimate(&self) -> Option<DVector<f64>> {
        Some(self.theta.clone())
    }

    fn box_clone(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}

/// LinUCB on the last `w` observations only; the Gram matrix is rebuilt from
/// the window buffer every round.
#[derive(Debug, Clone)]
pub struct SwLinUcb {
    params: RadiusParams,
    window: usize,
    buffer: VecDeque<(Vec<f64>, f64)>,
    round: usize,
    factor: SpdFactor,
    theta: DVector<f64>,
    beta: f64,
}

impl SwLinUcb {
    pub fn new(params: RadiusParams, window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidParameter("window length must be at least 1".into()));
        }
        let params = RadiusParams { gamma: 1.0, ..params };
        params.validate()?;
        let (v, _) = design_rebuild(&[], params.d, params.lambda, 1.0);
        Ok(Self {
            params,
            window,
            buffer: VecDeque::with_capacity(window + 1),
            round: 0,
            factor: SpdFactor::new(&v)?,
            theta: DVector::zeros(params.d),
            beta: beta_lb(0, &params),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Pairs currently inside the window, oldest first.
    pub fn buffer(&self) -> impl Iterator<Item = &(Vec<f64>, f64)> {
        self.buffer.iter()
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }
}

impl Policy for SwLinUcb {
    fn kind(&self) -> PolicyKind {
        PolicyKind::SwLinucb
    }

    fn select(&self, arms: &ArmSet) -> Result<Selection> {
        Error::check_dim(self.params.d, arms.dim())?;
        let mut scratch = vec![0.0; self.params.d];
        let theta = self.theta.as_slice();
        let values = arms.iter().map(|x| {
            dot(x, theta) + self.beta * self.factor.inv_quad_with(x, &mut scratch).max(0.0).sqrt()
        });
        argmax(values).map(Selection::arm)
    }

    fn observe(&mut self, x: &[f64], r: f64) -> Result<()> {
        Error::check_dim(self.params.d, x.len())?;
        self.buffer.push_back((x.to_vec(), r));
        if self.buffer.len() > self.window {
            self.buffer.pop_front();
        }
        let (v, b) = design_rebuild(self.buffer.make_contiguous(), self.params.d, self.params.lambda, 1.0);
        self.factor = SpdFactor::new(&v)?;
        self.theta = self.factor.solve(&b);
        self.beta = beta_lb(self.buffer.len(), &self.params);
        self.round += 1;
        Ok(())
    }

    fn round(&self) -> usize {
        self.round
    }

    fn estimate(&self) -> Option<DVector<f64>> {
        Some(self.theta.clone())
    }

    fn box_clone(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}
