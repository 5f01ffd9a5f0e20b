//! Parameter-recovery errors, per-timestep Gaussian summaries of trajectory
//! ensembles and divergences between them.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::GaussianBelief;
use crate::linalg::{self, symmetrize_mut};
use crate::simulate::TrajectoryDataset;

/// Root-mean-squared error of `ln θ̂ − ln θ`.
pub fn log_rmse(theta_true: &[f64], theta_est: &[f64]) -> Result<f64> {
    let errs = per_param_log_err(theta_true, theta_est)?;
    Ok((errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt())
}

/// [`log_rmse`] with logarithms to an arbitrary base.
pub fn log_rmse_base(theta_true: &[f64], theta_est: &[f64], base: f64) -> Result<f64> {
    Ok(log_rmse(theta_true, theta_est)? / base.ln())
}

/// Signed natural-log errors `ln θ̂ᵢ − ln θᵢ`.
pub fn per_param_log_err(theta_true: &[f64], theta_est: &[f64]) -> Result<Vec<f64>> {
    if theta_true.len() != theta_est.len() || theta_true.is_empty() {
        return Err(Error::Shape(format!(
            "parameter vectors of length {} and {}",
            theta_true.len(),
            theta_est.len()
        )));
    }
    theta_true
        .iter()
        .zip(theta_est)
        .map(|(&t, &e)| {
            if t > 0.0 && e > 0.0 && t.is_finite() && e.is_finite() {
                Ok(e.ln() - t.ln())
            } else {
                Err(Error::InvalidInput(format!(
                    "log error needs positive finite values, got {t} and {e}"
                )))
            }
        })
        .collect()
}

/// Which per-step quantity of a trajectory to summarize.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryField {
    States,
    Estimates,
    /// States stacked on top of the agent's estimates.
    Joint,
    ExperimenterObs,
}

/// Gaussian approximation of an ensemble at every timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct TimestepGaussianSummary {
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
    pub n_samples: usize,
}

impl TimestepGaussianSummary {
    pub fn horizon(&self) -> usize {
        self.means.len()
    }

    /// Summary built from analytic per-step beliefs, restricted to the block
    /// `start..start + len`.
    pub fn from_beliefs(beliefs: &[GaussianBelief], start: usize, len: usize) -> Self {
        let (means, covs) = beliefs
            .iter()
            .map(|b| {
                let m = b.marginal(start, len);
                (m.mean, m.cov)
            })
            .unzip();
        TimestepGaussianSummary {
            means,
            covs,
            n_samples: 0,
        }
    }
}

fn field_at(tr: &crate::simulate::Trajectory, field: SummaryField, t: usize) -> Result<DVector<f64>> {
    let missing = || Error::InvalidInput(format!("trajectory lacks {field:?} at step {t}"));
    match field {
        SummaryField::States => tr.states.get(t).cloned().ok_or_else(missing),
        SummaryField::Estimates => tr.estimates.get(t).cloned().ok_or_else(missing),
        SummaryField::Joint => {
            let x = tr.states.get(t).ok_or_else(missing)?;
            let e = tr.estimates.get(t).ok_or_else(missing)?;
            let mut v = DVector::zeros(x.len() + e.len());
            v.rows_mut(0, x.len()).copy_from(x);
            v.rows_mut(x.len(), e.len()).copy_from(e);
            Ok(v)
        }
        SummaryField::ExperimenterObs => tr
            .exp_obs
            .as_ref()
            .and_then(|o| o.get(t).cloned())
            .ok_or_else(missing),
    }
}

/// Per-step sample mean and unbiased sample covariance over trials.
pub fn empirical_summary(
    dataset: &TrajectoryDataset,
    field: SummaryField,
) -> Result<TimestepGaussianSummary> {
    let n = dataset.len();
    if n < 2 {
        return Err(Error::InvalidInput("summary needs at least two trials".into()));
    }
    let horizon = match field {
        SummaryField::ExperimenterObs => dataset.trials[0].exp_obs.as_ref().map_or(0, |o| o.len()),
        _ => dataset.trials[0].states.len(),
    };
    let mut means = Vec::with_capacity(horizon);
    let mut covs = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let samples: Vec<DVector<f64>> = dataset
            .trials
            .iter()
            .map(|tr| field_at(tr, field, t))
            .collect::<Result<_>>()?;
        let dim = samples[0].len();
        // Two-pass estimate with exactly summed means keeps the result
        // independent of trial order.
        let mean = DVector::from_fn(dim, |i, _| {
            let col: Vec<f64> = samples.iter().map(|s| s[i]).collect();
            linalg::exact_sum(&col) / n as f64
        });
        let mut cov = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..=i {
                let prods: Vec<f64> = samples
                    .iter()
                    .map(|s| (s[i] - mean[i]) * (s[j] - mean[j]))
                    .collect();
                let c = linalg::exact_sum(&prods) / (n - 1) as f64;
                cov[(i, j)] = c;
                cov[(j, i)] = c;
            }
        }
        symmetrize_mut(&mut cov);
        means.push(mean);
        covs.push(cov);
    }
    Ok(TimestepGaussianSummary {
        means,
        covs,
        n_samples: n,
    })
}

/// `½ KL(p‖q) + ½ KL(q‖p)` between two Gaussians.
pub fn symmetrized_kl(
    mean_p: &DVector<f64>,
    cov_p: &DMatrix<f64>,
    mean_q: &DVector<f64>,
    cov_q: &DMatrix<f64>,
) -> Result<f64> {
    let n = mean_p.len();
    if mean_q.len() != n || cov_p.shape() != (n, n) || cov_q.shape() != (n, n) {
        return Err(Error::Shape("Gaussians of different dimension".into()));
    }
    let cp = linalg::cholesky_jitter(&linalg::symmetrize(cov_p)).ok_or(Error::Singular {
        what: "covariance in KL divergence",
        t: 0,
    })?;
    let cq = linalg::cholesky_jitter(&linalg::symmetrize(cov_q)).ok_or(Error::Singular {
        what: "covariance in KL divergence",
        t: 0,
    })?;
    let diff = mean_q - mean_p;
    let tr_qp = cq.solve(cov_p).trace();
    let tr_pq = cp.solve(cov_q).trace();
    let maha = diff.dot(&cp.solve(&diff)) + diff.dot(&cq.solve(&diff));
    Ok((0.25 * (tr_qp + tr_pq + maha - 2.0 * n as f64)).max(0.0))
}

/// Time-averaged symmetrized KL between two per-step summaries.
pub fn mean_skl_over_time(a: &TimestepGaussianSummary, b: &TimestepGaussianSummary) -> Result<f64> {
    Ok(linalg::exact_sum(&skl_per_step(a, b)?) / a.horizon() as f64)
}

/// Symmetrized KL at each timestep.
pub fn skl_per_step(a: &TimestepGaussianSummary, b: &TimestepGaussianSummary) -> Result<Vec<f64>> {
    if a.horizon() != b.horizon() || a.horizon() == 0 {
        return Err(Error::Shape(format!(
            "summaries with {} and {} steps",
            a.horizon(),
            b.horizon()
        )));
    }
    (0..a.horizon())
        .map(|t| {
            symmetrized_kl(&a.means[t], &a.covs[t], &b.means[t], &b.covs[t]).map_err(|e| match e {
                Error::Singular { what, .. } => Error::Singular { what, t },
                other => other,
            })
        })
        .collect()
}

/// Least-squares slope of `ln rmse` against `ln n`.
pub fn fit_convergence_rate(ns: &[f64], rmses: &[f64]) -> Result<f64> {
    if ns.len() != rmses.len() || ns.len() < 2 {
        return Err(Error::InvalidInput("need at least two (n, rmse) pairs".into()));
    }
    if ns.iter().chain(rmses).any(|&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::InvalidInput("trial counts and errors must be positive".into()));
    }
    let x: Vec<f64> = ns.iter().map(|v| v.ln()).collect();
    let y: Vec<f64> = rmses.iter().map(|v| v.ln()).collect();
    let k = x.len() as f64;
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::InvalidInput("all trial counts are equal".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Metrics report written by the benchmark commands.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log_rmse: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub per_param_log_err: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_skl: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, serde_json::Value>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_log_offset() {
        let t = [1e-5, 0.2, 0.02];
        let e: Vec<f64> = t.iter().map(|v| v * std::f64::consts::E).collect();
        assert!((log_rmse(&t, &e).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(log_rmse(&t, &t).unwrap(), 0.0);
        assert!(log_rmse(&[1.0], &[0.0]).is_err());
    }

    #[test]
    fn unit_mean_shift_kl() {
        let one = DMatrix::from_element(1, 1, 1.0);
        let v = symmetrized_kl(
            &DVector::from_element(1, 0.0),
            &one,
            &DVector::from_element(1, 1.0),
            &one,
        )
        .unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn power_law_slope() {
        let ns = [1.0, 3.0, 10.0, 32.0, 100.0];
        let r: Vec<f64> = ns.iter().map(|n: &f64| 2.0 / n.sqrt()).collect();
        assert!((fit_convergence_rate(&ns, &r).unwrap() + 0.5).abs() < 1e-10);
        assert!(fit_convergence_rate(&[3.0, 3.0], &[1.0, 2.0]).is_err());
    }
}
