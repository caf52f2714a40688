//! Forgetting-based bandit algorithms for drifting and piecewise-stationary
//! linear, generalized linear and self-concordant reward models.

pub mod confidence;
pub mod design;
pub mod env;
pub mod error;
pub mod glm;
pub mod harness;
pub mod linalg;
pub mod policy;

pub use confidence::{RadiusParams, Setting};
pub use design::{DesignState, NormKind};
pub use env::{ArmSet, RewardModel, Trajectory};
pub use error::{Error, Result};
pub use glm::{Link, LinkKind, WeightedHistory};
pub use policy::{Policy, PolicyConfig, PolicyKind, Selection};
