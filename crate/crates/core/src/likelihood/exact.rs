//! Closed-form likelihood for models without signal-dependent noise.
//!
//! With `C = D = ∅` the pair `[x; x̃]` is a linear-Gaussian system, so the
//! measurements of a whole trial are jointly Gaussian. The covariance of all
//! `T` measurements is assembled once per model and factored once; each trial
//! then costs one triangular solve.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rayon::prelude::*;

use super::LikelihoodOptions;
use crate::error::{Error, Result};
use crate::linalg::{self, block_diag};
use crate::model::{ExperimenterObservationModel, GainSchedule, SystemModel};
use crate::simulate::{Trajectory, TrajectoryDataset};

/// Batch Gaussian over the stacked measurements of a trial.
pub struct ExactLqgPlan {
    obs_dim: usize,
    horizon: usize,
    partial: bool,
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    first: Cholesky<f64, Dyn>,
    opts: LikelihoodOptions,
}

impl ExactLqgPlan {
    /// Any signal-dependent noise terms of `model` are ignored.
    pub fn new(
        model: &SystemModel,
        gains: &GainSchedule,
        exp: Option<&ExperimenterObservationModel>,
        opts: LikelihoodOptions,
    ) -> Result<Self> {
        let m = model.state_dim;
        let horizon = model.horizon;
        let (obs_map, obs_noise) = match exp {
            None => {
                let mut o = DMatrix::zeros(m, 2 * m);
                o.columns_mut(0, m).fill_with_identity();
                (o, DMatrix::zeros(m, m))
            }
            Some(e) => {
                let mut o = DMatrix::zeros(e.obs_dim(), 2 * m);
                o.columns_mut(0, m).copy_from(&e.obs_map);
                (o, e.noise_cov())
            }
        };
        let d = obs_map.nrows();

        let mut transitions = Vec::with_capacity(horizon);
        let mut noise = Vec::with_capacity(horizon);
        for t in 0..horizon.saturating_sub(1) {
            let (a, b, h) = (&model.a[t], &model.b[t], &model.h[t]);
            let (l, k) = (&gains.l[t], &gains.k[t]);
            let bl = b * l;
            let kh = k * h;
            let mut f = DMatrix::zeros(2 * m, 2 * m);
            f.view_mut((0, 0), (m, m)).copy_from(a);
            f.view_mut((0, m), (m, m)).copy_from(&(-&bl));
            f.view_mut((m, 0), (m, m)).copy_from(&kh);
            f.view_mut((m, m), (m, m)).copy_from(&(a - &bl - &kh));
            let kw = k * &model.w_scale;
            let q = block_diag(&[
                &model.process_cov(),
                &(&kw * kw.transpose() + model.estimation_noise_cov()),
            ]);
            transitions.push(f);
            noise.push(q);
        }

        let mut mu = DVector::zeros(2 * m);
        mu.rows_mut(0, m).copy_from(&model.init_state_mean);
        mu.rows_mut(m, m).copy_from(&model.init_estimate_mean);
        let mut p = block_diag(&[&model.init_state_cov, &model.init_estimate_cov]);

        let n = d * horizon;
        let mut mean = DVector::zeros(n);
        let mut cov = DMatrix::zeros(n, n);
        for s in 0..horizon {
            mean.rows_mut(s * d, d).copy_from(&(&obs_map * &mu));
            let mut psi = &p * obs_map.transpose();
            for t in s..horizon {
                let block = &obs_map * &psi;
                cov.view_mut((t * d, s * d), (d, d)).copy_from(&block);
                cov.view_mut((s * d, t * d), (d, d)).copy_from(&block.transpose());
                if t + 1 < horizon {
                    psi = &transitions[t] * psi;
                }
            }
            let mut diag = cov.view((s * d, s * d), (d, d)) + &obs_noise;
            linalg::symmetrize_mut(&mut diag);
            cov.view_mut((s * d, s * d), (d, d)).copy_from(&diag);
            if s + 1 < horizon {
                mu = &transitions[s] * mu;
                p = &transitions[s] * p * transitions[s].transpose() + &noise[s];
                linalg::symmetrize_mut(&mut p);
            }
        }
        let first_cov = cov.view((0, 0), (d, d)).into_owned();
        let chol = linalg::cholesky_jitter(&cov).ok_or(Error::Singular {
            what: "joint measurement covariance",
            t: 0,
        })?;
        let first = linalg::cholesky_jitter(&first_cov).ok_or(Error::Singular {
            what: "initial measurement covariance",
            t: 0,
        })?;
        Ok(ExactLqgPlan {
            obs_dim: d,
            horizon,
            partial: exp.is_some(),
            mean,
            chol,
            first,
            opts,
        })
    }

    pub fn trajectory(&self, data: &Trajectory) -> Result<f64> {
        let series = if self.partial {
            data.exp_obs.as_ref().ok_or_else(|| {
                Error::InvalidInput("trajectory has no experimenter measurements".into())
            })?
        } else {
            &data.states
        };
        if series.len() != self.horizon {
            return Err(Error::Shape(format!(
                "trajectory has {} steps, model horizon is {}",
                series.len(),
                self.horizon
            )));
        }
        let d = self.obs_dim;
        let mut stacked = DVector::zeros(d * self.horizon);
        for (t, v) in series.iter().enumerate() {
            if v.len() != d {
                return Err(Error::Shape(format!(
                    "measurement at step {t} has length {}, expected {d}",
                    v.len()
                )));
            }
            if !v.iter().all(|x| x.is_finite()) {
                return Err(Error::NonFinite(format!("measurement at step {t}")));
            }
            stacked.rows_mut(t * d, d).copy_from(v);
        }
        let residual = stacked - &self.mean;
        let mut ll = linalg::gaussian_logpdf_chol(&self.chol, &residual);
        if !self.opts.include_initial {
            ll -= linalg::gaussian_logpdf_chol(&self.first, &residual.rows(0, d).into_owned());
        }
        Ok(ll)
    }

    pub fn dataset(&self, dataset: &TrajectoryDataset) -> Result<f64> {
        let values: Vec<f64> = dataset
            .trials
            .par_iter()
            .enumerate()
            .map(|(i, tr)| {
                self.trajectory(tr).map_err(|e| Error::Trial {
                    trial: i,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;
        Ok(linalg::exact_sum(&values))
    }
}

/// Exact log-likelihood of one trial under the model with its
/// signal-dependent noise terms dropped.
pub fn exact_plain_lqg_loglik(
    model: &SystemModel,
    gains: &GainSchedule,
    data: &Trajectory,
    exp: Option<&ExperimenterObservationModel>,
    opts: LikelihoodOptions,
) -> Result<f64> {
    ExactLqgPlan::new(model, gains, exp, opts)?.trajectory(data)
}
