//! Experiment drivers shared by the command-line tool, the examples and the
//! acceptance tests. Every driver is deterministic in its seed.

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::{fit_mle, FitOptions, FitProblem, LikelihoodKind, ParamSpec};
use crate::likelihood::{noise_matched_model, predict_joint_moments, LikelihoodOptions, LikelihoodPlan};
use crate::metrics::{
    empirical_summary, fit_convergence_rate, mean_skl_over_time, per_param_log_err, skl_per_step,
    SummaryField, TimestepGaussianSummary,
};
use crate::model::{CostModel, ExperimenterObservationModel, SystemModel};
use crate::simulate::{derive_trial_seed, rollout_batch, TrajectoryDataset};
use crate::solver::{solve_gains, SolverOptions};
use crate::zoo::{
    position_observer, random_problem_scaled, reaching, reaching_model, saccade_model,
    RandomProblemParams, ReachingParams, SaccadeParams,
};

const DATA_SALT: u64 = 0xDA7A;
const FIT_SALT: u64 = 0xF17;

fn data_seed(seed: u64, rep: u64) -> u64 {
    derive_trial_seed(seed ^ DATA_SALT, rep)
}

fn fit_seed(seed: u64, rep: u64) -> u64 {
    derive_trial_seed(seed ^ FIT_SALT, rep)
}

fn median(values: &[f64]) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|e| e * e).sum::<f64>() / values.len() as f64).sqrt()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentMatchingReport {
    pub n_rollouts: usize,
    pub seed: u64,
    /// Mean over steps of the symmetrized KL between the empirical state
    /// distribution and the moment-matched prediction.
    pub mean_skl_analytic: f64,
    /// Same for a plain model with noise matched on average.
    pub mean_skl_baseline: f64,
    pub skl_analytic: Vec<f64>,
    pub skl_baseline: Vec<f64>,
}

/// Compares per-step state distributions of many reaching rollouts with the
/// analytic moment-matched prediction and with the noise-matched baseline.
pub fn moment_matching(p: &ReachingParams, n_rollouts: usize, seed: u64) -> Result<MomentMatchingReport> {
    let b = reaching_model(p);
    let m = b.model.state_dim;
    let sol = solve_gains(&b.model, &b.cost, SolverOptions::default())?;
    let data = rollout_batch(&b.model, &sol.gains, n_rollouts, seed, None);
    let emp = empirical_summary(&data, SummaryField::States)?;
    let analytic = TimestepGaussianSummary::from_beliefs(&predict_joint_moments(&b.model, &sol.gains), 0, m);
    let nm = noise_matched_model(&b.model, &sol.gains);
    let nm_sol = solve_gains(&nm, &b.cost, SolverOptions::default())?;
    let baseline = TimestepGaussianSummary::from_beliefs(&predict_joint_moments(&nm, &nm_sol.gains), 0, m);
    let skl_analytic = skl_per_step(&emp, &analytic)?;
    let skl_baseline = skl_per_step(&emp, &baseline)?;
    Ok(MomentMatchingReport {
        n_rollouts,
        seed,
        mean_skl_analytic: mean_skl_over_time(&emp, &analytic)?,
        mean_skl_baseline: mean_skl_over_time(&emp, &baseline)?,
        skl_analytic,
        skl_baseline,
    })
}

/// One fit of a recovery experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveryRow {
    pub label: String,
    pub rep: usize,
    pub n_trials: usize,
    pub truth: Vec<f64>,
    pub estimate: Vec<f64>,
    /// `ln θ̂ − ln θ` per parameter.
    pub log_err: Vec<f64>,
    pub loglik: f64,
    pub kind: LikelihoodKind,
}

impl RecoveryRow {
    pub fn log_rmse(&self) -> f64 {
        rms(&self.log_err)
    }
}

/// Per-parameter RMS of the log errors over a set of fits.
pub fn per_param_rmse(rows: &[RecoveryRow]) -> Vec<f64> {
    let n = rows.first().map_or(0, |r| r.log_err.len());
    (0..n)
        .map(|i| rms(&rows.iter().map(|r| r.log_err[i]).collect::<Vec<_>>()))
        .collect()
}

/// Per-parameter median of `|ln θ̂ − ln θ|`.
pub fn per_param_median_abs_err(rows: &[RecoveryRow]) -> Vec<f64> {
    let n = rows.first().map_or(0, |r| r.log_err.len());
    (0..n)
        .map(|i| median(&rows.iter().map(|r| r.log_err[i].abs()).collect::<Vec<_>>()))
        .collect()
}

#[allow(clippy::too_many_arguments)]
fn fit_row(
    label: String,
    rep: usize,
    spec: &ParamSpec,
    truth: &[f64],
    model: &SystemModel,
    cost: &CostModel,
    exp: Option<&ExperimenterObservationModel>,
    data: &TrajectoryDataset,
    opts: &FitOptions,
) -> Result<RecoveryRow> {
    let problem = FitProblem {
        spec,
        dataset: data,
        base_model: model,
        base_cost: cost,
        exp,
    };
    let fit = fit_mle(&problem, opts)?;
    Ok(RecoveryRow {
        label,
        rep,
        n_trials: data.len(),
        truth: truth.to_vec(),
        log_err: per_param_log_err(truth, &fit.theta_mle)?,
        estimate: fit.theta_mle,
        loglik: fit.loglik,
        kind: opts.kind,
    })
}

/// Reaching datasets of `n_trials` full-observation trials, one per rep.
pub fn reaching_datasets(p: &ReachingParams, n_trials: usize, reps: usize, seed: u64) -> Result<Vec<TrajectoryDataset>> {
    let b = reaching_model(p);
    let sol = solve_gains(&b.model, &b.cost, SolverOptions::default())?;
    Ok((0..reps)
        .map(|rep| rollout_batch(&b.model, &sol.gains, n_trials, data_seed(seed, rep as u64), None))
        .collect())
}

/// Fits `(r, v, f)` to each dataset with the given likelihood.
pub fn reaching_recovery(
    p: &ReachingParams,
    datasets: &[TrajectoryDataset],
    kind: LikelihoodKind,
    n_starts: usize,
    seed: u64,
) -> Result<Vec<RecoveryRow>> {
    let b = reaching_model(p);
    datasets
        .iter()
        .enumerate()
        .map(|(rep, data)| {
            let opts = FitOptions {
                n_starts,
                seed: fit_seed(seed, rep as u64),
                kind,
                ..Default::default()
            };
            fit_row(format!("reaching/{kind:?}"), rep, &b.spec, &b.truth, &b.model, &b.cost, None, data, &opts)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergencePoint {
    pub n_trials: usize,
    /// Joint log-RMSE of each repetition.
    pub rmse: Vec<f64>,
    pub median_rmse: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub points: Vec<ConvergencePoint>,
    /// Least-squares slope of ln(median RMSE) against ln n.
    pub slope: f64,
    pub rows: Vec<RecoveryRow>,
}

/// Recovery error as a function of trial count. Smaller datasets are
/// prefixes of the largest one, so repetitions differ only in their data.
pub fn sample_size_convergence(
    p: &ReachingParams,
    ns: &[usize],
    reps: usize,
    n_starts: usize,
    seed: u64,
) -> Result<ConvergenceReport> {
    let largest = ns.iter().copied().max().unwrap_or(0);
    let full = reaching_datasets(p, largest, reps, seed)?;
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for &n in ns {
        let subsets: Vec<TrajectoryDataset> = full.iter().map(|d| d.take(n)).collect();
        let fits = reaching_recovery(p, &subsets, LikelihoodKind::MomentMatched, n_starts, seed ^ n as u64)?;
        let rmse: Vec<f64> = fits.iter().map(RecoveryRow::log_rmse).collect();
        points.push(ConvergencePoint {
            n_trials: n,
            median_rmse: median(&rmse),
            rmse,
        });
        rows.extend(fits);
    }
    let xs: Vec<f64> = points.iter().map(|pt| pt.n_trials as f64).collect();
    let ys: Vec<f64> = points.iter().map(|pt| pt.median_rmse).collect();
    Ok(ConvergenceReport {
        slope: fit_convergence_rate(&xs, &ys)?,
        points,
        rows,
    })
}

/// Joint `(r₁, r₂)` recovery on `count` random problems with seeds
/// `seed, seed + 1, …`.
pub fn random_sweep(
    base: &RandomProblemParams,
    count: usize,
    n_trials: usize,
    n_starts: usize,
    seed: u64,
) -> Result<Vec<RecoveryRow>> {
    (0..count as u64)
        .map(|i| {
            let p = RandomProblemParams {
                seed: seed + i,
                ..base.clone()
            };
            let b = random_problem_scaled(&p);
            let sol = solve_gains(&b.model, &b.cost, SolverOptions::default())?;
            let data = rollout_batch(&b.model, &sol.gains, n_trials, data_seed(p.seed, 0), None);
            let opts = FitOptions {
                n_starts,
                seed: fit_seed(p.seed, 0),
                ..Default::default()
            };
            fit_row(format!("random/{}", p.seed), i as usize, &b.spec, &b.truth, &b.model, &b.cost, None, &data, &opts)
        })
        .collect()
}

/// `count` values log-spaced over `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..count)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect()
}

/// Saccade effort-weight recovery; the bounds of every fit are those of
/// the default problem, independent of the true value.
pub fn saccade_recovery(
    r_values: &[f64],
    reps: usize,
    n_trials: usize,
    n_starts: usize,
    seed: u64,
) -> Result<Vec<RecoveryRow>> {
    let spec = saccade_model(&SaccadeParams::default()).spec;
    let mut rows = Vec::new();
    for (j, &r) in r_values.iter().enumerate() {
        let b = saccade_model(&SaccadeParams {
            r,
            ..Default::default()
        });
        let sol = solve_gains(&b.model, &b.cost, SolverOptions::default())?;
        for rep in 0..reps {
            let key = (j * reps + rep) as u64;
            let data = rollout_batch(&b.model, &sol.gains, n_trials, data_seed(seed, key), None);
            let opts = FitOptions {
                n_starts,
                seed: fit_seed(seed, key),
                ..Default::default()
            };
            rows.push(fit_row(format!("saccade/r={r:e}"), rep, &spec, &b.truth, &b.model, &b.cost, None, &data, &opts)?);
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridCell {
    pub params: (String, String),
    pub values: (f64, f64),
    pub rmse: Vec<f64>,
}

/// Recovery RMSE over pairwise grids of the reaching parameters, the third
/// parameter held at its default.
pub fn reaching_grid(grid: usize, n_trials: usize, reps: usize, n_starts: usize, seed: u64) -> Result<Vec<GridCell>> {
    let base = ReachingParams::default();
    let axes = [
        log_space(base.r / 10.0, base.r * 10.0, grid),
        log_space(base.v / 10.0, base.v * 10.0, grid),
        log_space(base.f / 10.0, base.f * 10.0, grid),
    ];
    let names = ["r", "v", "f"];
    let mut cells = Vec::new();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        for &a in &axes[i] {
            for &b in &axes[j] {
                let mut theta = base.truth();
                theta[i] = a;
                theta[j] = b;
                let p = ReachingParams {
                    r: theta[0],
                    v: theta[1],
                    f: theta[2],
                    ..base.clone()
                };
                let cell_seed = seed ^ ((cells.len() as u64) << 20);
                let data = reaching_datasets(&p, n_trials, reps, cell_seed)?;
                let rows = reaching_recovery(&p, &data, LikelihoodKind::MomentMatched, n_starts, cell_seed)?;
                cells.push(GridCell {
                    params: (names[i].into(), names[j].into()),
                    values: (a, b),
                    rmse: per_param_rmse(&rows),
                });
            }
        }
    }
    Ok(cells)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrackingReport {
    /// Correlation over steps between the tracked and the true velocity
    /// estimate, per trial.
    pub correlation: Vec<f64>,
    /// Fraction of steps with the true estimate inside the ±2 SD band.
    pub coverage: f64,
}

/// Belief tracking of the agent's velocity estimate from noisy position
/// measurements of reaching trials.
pub fn belief_tracking(p: &ReachingParams, exp_noise_sd: f64, n_trials: usize, seed: u64) -> Result<TrackingReport> {
    let b = reaching_model(p);
    let m = b.model.state_dim;
    let exp = position_observer(exp_noise_sd);
    let sol = solve_gains(&b.model, &b.cost, SolverOptions::default())?;
    let data = rollout_batch(&b.model, &sol.gains, n_trials, seed, Some(&exp));
    let plan = LikelihoodPlan::new(&b.model, &sol.gains, Some(&exp), LikelihoodOptions::default());
    let idx = m + reaching::VELOCITY;
    let mut correlation = Vec::with_capacity(n_trials);
    let (mut inside, mut total) = (0usize, 0usize);
    for tr in &data.trials {
        let (_, beliefs) = plan.trajectory(tr)?;
        let tracked = DVector::from_iterator(beliefs.len(), beliefs.iter().map(|bl| bl.mean[idx]));
        let truth = DVector::from_iterator(tr.estimates.len(), tr.estimates.iter().map(|e| e[reaching::VELOCITY]));
        correlation.push(pearson(&tracked, &truth));
        for (bl, e) in beliefs.iter().zip(&tr.estimates) {
            let sd = bl.cov[(idx, idx)].max(0.0).sqrt();
            total += 1;
            if (bl.mean[idx] - e[reaching::VELOCITY]).abs() <= 2.0 * sd {
                inside += 1;
            }
        }
    }
    Ok(TrackingReport {
        correlation,
        coverage: inside as f64 / total.max(1) as f64,
    })
}

fn pearson(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let (ma, mb) = (a.mean(), b.mean());
    let (da, db) = (a.add_scalar(-ma), b.add_scalar(-mb));
    da.dot(&db) / (da.norm() * db.norm())
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TimingReport {
    pub n_trials: usize,
    pub seconds_gains: f64,
    pub seconds_total: f64,
}

/// Wall-clock time of one reaching likelihood evaluation: gains plus the
/// likelihood of `n_trials` trials. Reports the fastest of `repeats` runs.
pub fn likelihood_timing(p: &ReachingParams, n_trials: usize, repeats: usize, seed: u64) -> Result<TimingReport> {
    let b = reaching_model(p);
    let sol = solve_gains(&b.model, &b.cost, SolverOptions::default())?;
    let data = rollout_batch(&b.model, &sol.gains, n_trials, seed, None);
    let mut best = (f64::INFINITY, f64::INFINITY);
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let sol = solve_gains(&b.model, &b.cost, SolverOptions::default())?;
        let gains = start.elapsed().as_secs_f64();
        let ll = LikelihoodPlan::new(&b.model, &sol.gains, None, LikelihoodOptions::default()).dataset(&data)?;
        let total = start.elapsed().as_secs_f64();
        if !ll.is_finite() {
            return Err(Error::NonFinite("reaching log-likelihood".into()));
        }
        if total < best.1 {
            best = (gains, total);
        }
    }
    Ok(TimingReport {
        n_trials,
        seconds_gains: best.0,
        seconds_total: best.1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_and_spacing() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let xs = log_space(1e-6, 1e-4, 3);
        assert!((xs[1] - 1e-5).abs() < 1e-18);
    }

    #[test]
    fn perfect_tracking_correlates() {
        let a = DVector::from_vec(vec![1.0, 2.0, 4.0]);
        assert!((pearson(&a, &(&a * 3.0)) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn small_saccade_recovery_runs() {
        let rows = saccade_recovery(&[1e-4], 1, 5, 2, 1).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].log_err[0].abs() < 1.0, "{:?}", rows[0]);
    }
}
