//! Benchmark problem families.

mod lkj;
pub mod random;
pub mod reaching;
pub mod saccade;

pub use lkj::sample_lkj_cholesky;
pub use random::{control_authority, random_problem, random_problem_scaled, RandomProblemParams};
pub use reaching::{position_observer, reaching_model, ReachingParams};
pub use saccade::{saccade_model, SaccadeParams};

use crate::estimator::ParamSpec;
use crate::model::{CostModel, SystemModel};

/// A model, its cost, the parameterization to fit and the generating θ.
#[derive(Clone, Debug)]
pub struct ProblemBundle {
    pub model: SystemModel,
    pub cost: CostModel,
    pub spec: ParamSpec,
    /// Natural-space parameter values used to build the bundle.
    pub truth: Vec<f64>,
}
