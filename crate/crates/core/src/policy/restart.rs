use nalgebra::DVector;

use super::{Policy, PolicyKind, Selection};
use crate::env::ArmSet;
use crate::error::{Error, Result};

/// Runs a static policy and throws its state away every `period` rounds.
#[derive(Clone)]
pub struct Restart {
    kind: PolicyKind,
    period: usize,
    fresh: Box<dyn Policy>,
    inner: Box<dyn Policy>,
    round: usize,
}

impl Restart {
    pub fn new(kind: PolicyKind, period: usize, base: Box<dyn Policy>) -> Result<Self> {
        if period == 0 {
            return Err(Error::InvalidParameter("restart period must be at least 1".into()));
        }
        if base.round() != 0 {
            return Err(Error::InvalidParameter("restart base policy must be fresh".into()));
        }
        Ok(Self { kind, period, inner: base.box_clone(), fresh: base, round: 0 })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    /// Observations received since the last restart.
    pub fn inner_round(&self) -> usize {
        self.inner.round()
    }
}

impl Policy for Restart {
    fn kind(&self) -> PolicyKind {
        self.kind
    }

    fn select(&self, arms: &ArmSet) -> Result<Selection> {
        self.inner.select(arms)
    }

    fn observe(&mut self, x: &[f64], r: f64) -> Result<()> {
        self.inner.observe(x, r)?;
        self.round += 1;
        if self.round.is_multiple_of(self.period) {
            self.inner = self.fresh.box_clone();
        }
        Ok(())
    }

    fn round(&self) -> usize {
        self.round
    }

    fn estimate(&self) -> Option<DVector<f64>> {
        self.inner.estimate()
    }

    fn box_clone(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}

/// Always plays the same arm.
#[derive(Debug, Clone)]
pub struct FixedArm {
    arm: usize,
    round: usize,
}

impl FixedArm {
    pub fn new(arm: usize) -> Self {
        Self { arm, round: 0 }
    }
}

impl Policy for FixedArm {
    fn kind(&self) -> PolicyKind {
        PolicyKind::FixedArm
    }

    fn select(&self, arms: &ArmSet) -> Result<Selection> {
        if self.arm >= arms.len() {
            return Err(Error::InvalidParameter(format!(
                "fixed arm {} outside an arm set of size {}",
                self.arm,
                arms.len()
            )));
        }
        Ok(Selection::arm(self.arm))
    }

    fn observe(&mut self, _x: &[f64], _r: f64) -> Result<()> {
        self.round += 1;
        Ok(())
    }

    fn round(&self) -> usize {
        self.round
    }

    fn box_clone(&self) -> Box<dyn Policy> {
        Box::new(self.clone())
    }
}
