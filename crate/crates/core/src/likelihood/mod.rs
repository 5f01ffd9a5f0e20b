//! Approximate trajectory likelihood under signal-dependent noise.
//!
//! The experimenter cannot see the agent's estimate `x̃`, so the likelihood
//! carries a Gaussian belief over it. Each step pushes that belief through the
//! joint dynamics of `[x; x̃]`, moment-matches the result, scores the new
//! measurement under its marginal and conditions on it.

mod baseline;
mod exact;
mod joint;

pub use baseline::{average_signal_noise, noise_matched_model};
pub use exact::{exact_plain_lqg_loglik, ExactLqgPlan};
pub use joint::{
    build_joint_dynamics_full, build_joint_dynamics_partial, condition_gaussian,
    propagate_moment_matched, GaussianBelief, JointDynamics, ObservedBlock,
};

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{self, block_diag};
use crate::model::{ExperimenterObservationModel, GainSchedule, SystemModel};
use crate::simulate::{Trajectory, TrajectoryDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LikelihoodOptions {
    /// Score the first measurement under the initial-state distribution.
    /// Disable for real data whose first state is known exactly.
    pub include_initial: bool,
}

impl Default for LikelihoodOptions {
    fn default() -> Self {
        LikelihoodOptions {
            include_initial: true,
        }
    }
}

/// Per-step joint dynamics for one parameter setting, shared by all trials.
pub struct LikelihoodPlan<'a> {
    model: &'a SystemModel,
    exp: Option<&'a ExperimenterObservationModel>,
    steps: Vec<JointDynamics>,
    opts: LikelihoodOptions,
}

impl<'a> LikelihoodPlan<'a> {
    pub fn new(
        model: &'a SystemModel,
        gains: &GainSchedule,
        exp: Option<&'a ExperimenterObservationModel>,
        opts: LikelihoodOptions,
    ) -> Self {
        let steps = (0..model.horizon.saturating_sub(1))
            .map(|t| match exp {
                None => build_joint_dynamics_full(model, gains, t),
                Some(e) => build_joint_dynamics_partial(model, e, gains, t),
            })
            .collect();
        LikelihoodPlan {
            model,
            exp,
            steps,
            opts,
        }
    }

    /// Log-likelihood of one trial and the belief after each measurement.
    ///
    /// Under full observability each belief is over `x̃[t]`; under partial
    /// observability it is over `[x[t]; x̃[t]]`.
    pub fn trajectory(&self, data: &Trajectory) -> Result<(f64, Vec<GaussianBelief>)> {
        match self.exp {
            None => self.full(&data.states),
            Some(e) => {
                let obs = data.exp_obs.as_ref().ok_or_else(|| {
                    Error::InvalidInput("trajectory has no experimenter measurements".into())
                })?;
                self.partial(e, obs)
            }
        }
    }

    fn check_data(&self, data: &[DVector<f64>], dim: usize) -> Result<()> {
        if data.len() != self.model.horizon {
            return Err(Error::Shape(format!(
                "trajectory has {} steps, model horizon is {}",
                data.len(),
                self.model.horizon
            )));
        }
        for (t, v) in data.iter().enumerate() {
            if v.len() != dim {
                return Err(Error::Shape(format!(
                    "measurement at step {t} has length {}, expected {dim}",
                    v.len()
                )));
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite(format!("measurement at step {t}")));
            }
        }
        Ok(())
    }

    fn full(&self, states: &[DVector<f64>]) -> Result<(f64, Vec<GaussianBelief>)> {
        let model = self.model;
        let m = model.state_dim;
        self.check_data(states, m)?;
        let mut factors = Vec::with_capacity(states.len());
        if self.opts.include_initial {
            factors.push(linalg::gaussian_logpdf(
                &states[0],
                &model.init_state_mean,
                &model.init_state_cov,
                0,
            )?);
        }
        let mut belief = GaussianBelief::new(
            model.init_estimate_mean.clone(),
            model.init_estimate_cov.clone(),
        );
        let mut beliefs = Vec::with_capacity(states.len());
        beliefs.push(belief.clone());
        for (t, jd) in self.steps.iter().enumerate() {
            let predicted = propagate_moment_matched(jd, &belief, Some(&states[t]));
            let (f, post) = condition_gaussian(&predicted, &states[t + 1], ObservedBlock::Head(m))
                .map_err(|e| at_step(e, t + 1))?;
            factors.push(f);
            belief = post;
            beliefs.push(belief.clone());
        }
        Ok((linalg::exact_sum(&factors), beliefs))
    }

    fn partial(
        &self,
        exp: &ExperimenterObservationModel,
        obs: &[DVector<f64>],
    ) -> Result<(f64, Vec<GaussianBelief>)> {
        let model = self.model;
        let m = model.state_dim;
        let s = exp.obs_dim();
        self.check_data(obs, s)?;

        // Joint of [x₁; x̃₁; o₁] under the initial distribution.
        let mut mean = DVector::zeros(2 * m + s);
        mean.rows_mut(0, m).copy_from(&model.init_state_mean);
        mean.rows_mut(m, m).copy_from(&model.init_estimate_mean);
        mean.rows_mut(2 * m, s)
            .copy_from(&(&exp.obs_map * &model.init_state_mean));
        let prior_cov = block_diag(&[&model.init_state_cov, &model.init_estimate_cov]);
        let map = {
            let mut map = nalgebra::DMatrix::zeros(s, 2 * m);
            map.columns_mut(0, m).copy_from(&exp.obs_map);
            map
        };
        let cross = &prior_cov * map.transpose();
        let mut cov = nalgebra::DMatrix::zeros(2 * m + s, 2 * m + s);
        cov.view_mut((0, 0), (2 * m, 2 * m)).copy_from(&prior_cov);
        cov.view_mut((0, 2 * m), (2 * m, s)).copy_from(&cross);
        cov.view_mut((2 * m, 0), (s, 2 * m)).copy_from(&cross.transpose());
        cov.view_mut((2 * m, 2 * m), (s, s))
            .copy_from(&(&map * &cross + exp.noise_cov()));

        let (f0, mut belief) =
            condition_gaussian(&GaussianBelief::new(mean, cov), &obs[0], ObservedBlock::Tail(s))
                .map_err(|e| at_step(e, 0))?;
        let mut factors = Vec::with_capacity(obs.len());
        if self.opts.include_initial {
            factors.push(f0);
        }
        let mut beliefs = Vec::with_capacity(obs.len());
        beliefs.push(belief.clone());
        for (t, jd) in self.steps.iter().enumerate() {
            let predicted = propagate_moment_matched(jd, &belief, None);
            let (f, post) = condition_gaussian(&predicted, &obs[t + 1], ObservedBlock::Tail(s))
                .map_err(|e| at_step(e, t + 1))?;
            factors.push(f);
            belief = post;
            beliefs.push(belief.clone());
        }
        Ok((linalg::exact_sum(&factors), beliefs))
    }

    /// Sum of per-trial log-likelihoods; independent of trial order.
    pub fn dataset(&self, dataset: &TrajectoryDataset) -> Result<f64> {
        let values: Vec<f64> = dataset
            .trials
            .par_iter()
            .enumerate()
            .map(|(i, tr)| {
                self.trajectory(tr)
                    .map(|(ll, _)| ll)
                    .map_err(|e| Error::Trial {
                        trial: i,
                        source: Box::new(e),
                    })
            })
            .collect::<Result<_>>()?;
        Ok(linalg::exact_sum(&values))
    }
}

fn at_step(e: Error, t: usize) -> Error {
    match e {
        Error::Singular { what, .. } => Error::Singular { what, t },
        other => other,
    }
}

/// Approximate log-likelihood of one trial plus the tracked beliefs.
pub fn log_likelihood_trajectory(
    model: &SystemModel,
    gains: &GainSchedule,
    data: &Trajectory,
    exp: Option<&ExperimenterObservationModel>,
    opts: LikelihoodOptions,
) -> Result<(f64, Vec<GaussianBelief>)> {
    LikelihoodPlan::new(model, gains, exp, opts).trajectory(data)
}

/// Approximate log-likelihood of a dataset of independent trials.
pub fn log_likelihood_dataset(
    model: &SystemModel,
    gains: &GainSchedule,
    dataset: &TrajectoryDataset,
    exp: Option<&ExperimenterObservationModel>,
    opts: LikelihoodOptions,
) -> Result<f64> {
    LikelihoodPlan::new(model, gains, exp, opts).dataset(dataset)
}

/// Unconditional moments of `[x[t]; x̃[t]]` for every step, propagated from
/// the initial distribution without conditioning on any data.
pub fn predict_joint_moments(model: &SystemModel, gains: &GainSchedule) -> Vec<GaussianBelief> {
    let m = model.state_dim;
    let mut mean = DVector::zeros(2 * m);
    mean.rows_mut(0, m).copy_from(&model.init_state_mean);
    mean.rows_mut(m, m).copy_from(&model.init_estimate_mean);
    let mut belief = GaussianBelief::new(
        mean,
        block_diag(&[&model.init_state_cov, &model.init_estimate_cov]),
    );
    let mut out = Vec::with_capacity(model.horizon);
    out.push(belief.clone());
    for t in 0..model.horizon.saturating_sub(1) {
        let jd = build_joint_dynamics_full(model, gains, t);
        belief = propagate_moment_matched(&jd, &belief, None);
        out.push(belief.clone());
    }
    out
}
