//! Maximum-likelihood fitting with random restarts.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bobyqa::{minimize_dfo, DfoOptions};
use super::params::{apply_params, ParamSpec};
use crate::error::{Error, Result};
use crate::likelihood::{noise_matched_model, ExactLqgPlan, LikelihoodOptions, LikelihoodPlan};
use crate::model::{CostModel, ExperimenterObservationModel, SystemModel};
use crate::simulate::{derive_trial_seed, TrajectoryDataset};
use crate::solver::{solve_gains, SolverOptions};

/// Which likelihood the fit maximizes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LikelihoodKind {
    /// Belief-tracking approximation that models signal-dependent noise.
    #[default]
    MomentMatched,
    /// Exact likelihood of the model with its signal-dependent noise dropped.
    PlainLqg,
    /// Exact likelihood of a plain model whose additive noise is inflated to
    /// the average signal-dependent noise at the candidate parameters.
    NoiseMatched,
}

/// Everything that stays fixed while θ varies.
#[derive(Clone, Copy)]
pub struct FitProblem<'a> {
    pub spec: &'a ParamSpec,
    pub dataset: &'a TrajectoryDataset,
    pub base_model: &'a SystemModel,
    pub base_cost: &'a CostModel,
    pub exp: Option<&'a ExperimenterObservationModel>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitOptions {
    pub n_starts: usize,
    pub seed: u64,
    pub kind: LikelihoodKind,
    pub solver: SolverOptions,
    pub dfo: DfoOptions,
    pub likelihood: LikelihoodOptions,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            n_starts: 10,
            seed: 0,
            kind: LikelihoodKind::MomentMatched,
            solver: SolverOptions::default(),
            dfo: DfoOptions::default(),
            likelihood: LikelihoodOptions::default(),
        }
    }
}

/// Log-likelihood of the dataset at θ (natural space).
pub fn log_likelihood_at(
    problem: &FitProblem,
    theta: &[f64],
    kind: LikelihoodKind,
    solver: SolverOptions,
    lik: LikelihoodOptions,
) -> Result<f64> {
    let (model, cost) = apply_params(problem.spec, theta, problem.base_model, problem.base_cost)?;
    match kind {
        LikelihoodKind::MomentMatched => {
            let sol = solve_gains(&model, &cost, solver)?;
            LikelihoodPlan::new(&model, &sol.gains, problem.exp, lik).dataset(problem.dataset)
        }
        LikelihoodKind::PlainLqg => {
            let plain = model.without_signal_noise();
            let sol = solve_gains(&plain, &cost, solver)?;
            ExactLqgPlan::new(&plain, &sol.gains, problem.exp, lik)?.dataset(problem.dataset)
        }
        LikelihoodKind::NoiseMatched => {
            let sol = solve_gains(&model, &cost, solver)?;
            let plain = noise_matched_model(&model, &sol.gains);
            let sol = solve_gains(&plain, &cost, solver)?;
            ExactLqgPlan::new(&plain, &sol.gains, problem.exp, lik)?.dataset(problem.dataset)
        }
    }
}

/// Negative log-likelihood at θ (natural space); failures map to `+∞`.
pub fn neg_loglik_objective(
    problem: &FitProblem,
    theta: &[f64],
    kind: LikelihoodKind,
    solver: SolverOptions,
    lik: LikelihoodOptions,
) -> f64 {
    match log_likelihood_at(problem, theta, kind, solver, lik) {
        Ok(ll) if ll.is_finite() => -ll,
        Ok(ll) => {
            log::debug!("non-finite log-likelihood {ll} at θ = {theta:?}");
            f64::INFINITY
        }
        Err(e) => {
            log::debug!("objective failed at θ = {theta:?}: {e}");
            f64::INFINITY
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    /// Initial point, natural space.
    pub init: Vec<f64>,
    /// Final point, natural space.
    #[serde(rename = "final")]
    pub final_theta: Vec<f64>,
    pub loglik: f64,
    pub n_evals: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub theta_mle: Vec<f64>,
    pub loglik: f64,
    pub starts: Vec<StartRecord>,
    pub best_start_index: usize,
    pub spec: ParamSpec,
    pub seed: u64,
    pub kind: LikelihoodKind,
}

impl FitResult {
    pub fn theta_by_name(&self) -> BTreeMap<String, f64> {
        self.names.iter().cloned().zip(self.theta_mle.iter().copied()).collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "theta_mle": self.theta_by_name(),
            "loglik": self.loglik,
            "starts": self.starts,
            "best_start_index": self.best_start_index,
            "spec": self.spec,
            "seed": self.seed,
            "likelihood": self.kind,
        })
    }
}

/// Uniform initial point in the transformed bound box for restart `start`.
pub fn start_point(spec: &ParamSpec, seed: u64, start: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_trial_seed(seed, start as u64));
    spec.bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
}

/// Runs `minimize_dfo` once from the transformed-space point `y0`.
pub fn fit_from(problem: &FitProblem, y0: &[f64], opts: &FitOptions) -> Result<StartRecord> {
    let spec = problem.spec;
    let objective = |y: &[f64]| {
        neg_loglik_objective(problem, &spec.to_natural(y), opts.kind, opts.solver, opts.likelihood)
    };
    let res = minimize_dfo(objective, &spec.lower(), &spec.upper(), y0, &opts.dfo)?;
    Ok(StartRecord {
        init: spec.to_natural(y0),
        final_theta: spec.to_natural(&res.x),
        loglik: -res.f,
        n_evals: res.n_evals,
        converged: res.converged,
    })
}

/// Maximum-likelihood estimate from `opts.n_starts` random restarts.
///
/// The best converged start wins, ties going to the lowest index; if none
/// converged the best finite start is used.
pub fn fit_mle(problem: &FitProblem, opts: &FitOptions) -> Result<FitResult> {
    if opts.n_starts == 0 {
        return Err(Error::InvalidInput("n_starts must be at least 1".into()));
    }
    problem.spec.validate(problem.base_model, problem.base_cost)?;
    if problem.dataset.is_empty() {
        return Err(Error::InvalidInput("dataset has no trials".into()));
    }
    let starts: Vec<Result<StartRecord>> = (0..opts.n_starts)
        .into_par_iter()
        .map(|i| fit_from(problem, &start_point(problem.spec, opts.seed, i), opts))
        .collect();
    let mut records = Vec::with_capacity(starts.len());
    let mut diagnostics = Vec::new();
    for (i, s) in starts.into_iter().enumerate() {
        match s {
            Ok(r) => records.push(r),
            Err(e) => {
                diagnostics.push(format!("start {i}: {e}"));
                return Err(Error::AllStartsFailed {
                    n: opts.n_starts,
                    diagnostics: diagnostics.join("; "),
                });
            }
        }
    }
    let pick = |require_converged: bool| {
        let mut best: Option<usize> = None;
        for (i, r) in records.iter().enumerate() {
            if !r.loglik.is_finite() || (require_converged && !r.converged) {
                continue;
            }
            if best.is_none_or(|b| r.loglik > records[b].loglik) {
                best = Some(i);
            }
        }
        best
    };
    let best = pick(true).or_else(|| pick(false)).ok_or_else(|| Error::AllStartsFailed {
        n: opts.n_starts,
        diagnostics: records
            .iter()
            .enumerate()
            .map(|(i, r)| format!("start {i}: loglik {} after {} evaluations", r.loglik, r.n_evals))
            .collect::<Vec<_>>()
            .join("; "),
    })?;
    Ok(FitResult {
        names: problem.spec.names.clone(),
        theta_mle: records[best].final_theta.clone(),
        loglik: records[best].loglik,
        best_start_index: best,
        starts: records,
        spec: problem.spec.clone(),
        seed: opts.seed,
        kind: opts.kind,
    })
}
