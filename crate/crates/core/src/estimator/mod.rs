//! Parameterized models and maximum-likelihood estimation of their parameters.

mod bobyqa;
mod fit;
mod params;

pub use bobyqa::{minimize_dfo, DfoOptions, DfoResult};
pub use fit::{
    fit_from, fit_mle, log_likelihood_at, neg_loglik_objective, start_point, FitOptions,
    FitProblem, FitResult, LikelihoodKind, StartRecord,
};
pub use params::{apply_params, Binding, MatrixPath, ParamSpec, TimeSelector, Transform};
