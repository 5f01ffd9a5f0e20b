//! Stochastic closed-loop rollouts of the agent and the experimenter's
//! measurements.
//!
//! Every trial owns a ChaCha8 generator seeded from `(seed, trial)` so
//! datasets are identical regardless of how many workers produce them.
//! Gaussian draws use the ziggurat sampler of `rand_distr::StandardNormal`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::model::{ExperimenterObservationModel, GainSchedule, SystemModel};

/// One simulated trial; every field is indexed by timestep.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub estimates: Vec<DVector<f64>>,
    /// `T − 1` controls, `u[t] = −L[t] x̃[t]`.
    pub controls: Vec<DVector<f64>>,
    pub agent_obs: Vec<DVector<f64>>,
    pub exp_obs: Option<Vec<DVector<f64>>>,
    pub seed: u64,
}

impl Trajectory {
    /// Trajectory known only through its experimenter measurements, as
    /// loaded from real data.
    pub fn from_exp_obs(exp_obs: Vec<DVector<f64>>) -> Self {
        Trajectory {
            states: Vec::new(),
            estimates: Vec::new(),
            controls: Vec::new(),
            agent_obs: Vec::new(),
            exp_obs: Some(exp_obs),
            seed: 0,
        }
    }

    /// Trajectory known only through its fully observed states.
    pub fn from_states(states: Vec<DVector<f64>>) -> Self {
        Trajectory {
            states,
            estimates: Vec::new(),
            controls: Vec::new(),
            agent_obs: Vec::new(),
            exp_obs: None,
            seed: 0,
        }
    }

    /// Realized quadratic cost `Σ xᵀQx + Σ uᵀRu`.
    pub fn realized_cost(&self, cost: &crate::model::CostModel) -> f64 {
        let state_cost: f64 = self
            .states
            .iter()
            .zip(&cost.q)
            .map(|(x, q)| (x.transpose() * q * x)[(0, 0)])
            .sum();
        let control_cost: f64 = self
            .controls
            .iter()
            .zip(&cost.r)
            .map(|(u, r)| (u.transpose() * r * u)[(0, 0)])
            .sum();
        state_cost + control_cost
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryDataset {
    pub trials: Vec<Trajectory>,
    pub model_fingerprint: String,
    pub seed: u64,
}

impl TrajectoryDataset {
    pub fn new(trials: Vec<Trajectory>) -> Self {
        TrajectoryDataset {
            trials,
            model_fingerprint: String::new(),
            seed: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    /// Sub-dataset of the first `n` trials.
    pub fn take(&self, n: usize) -> Self {
        TrajectoryDataset {
            trials: self.trials.iter().take(n).cloned().collect(),
            ..self.clone()
        }
    }
}

/// Counter-based seed for trial `trial` of a dataset seeded with `seed`.
pub fn derive_trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial.wrapping_add(0x243F_6A88_85A3_08D3)))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_iterator(n, (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// Square-root factor `F` with `F Fᵀ = cov` that tolerates singular covariances.
pub fn sqrt_factor(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(crate::linalg::symmetrize(cov));
    let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals)
}

/// Precomputed factors for repeated rollouts of one model.
struct RolloutPlan<'a> {
    model: &'a SystemModel,
    gains: &'a GainSchedule,
    init_state_factor: DMatrix<f64>,
    init_estimate_factor: DMatrix<f64>,
}

impl<'a> RolloutPlan<'a> {
    fn new(model: &'a SystemModel, gains: &'a GainSchedule) -> Self {
        RolloutPlan {
            model,
            gains,
            init_state_factor: sqrt_factor(&model.init_state_cov),
            init_estimate_factor: sqrt_factor(&model.init_estimate_cov),
        }
    }

    fn run(&self, seed: u64) -> Trajectory {
        let model = self.model;
        let (m, k, horizon) = (model.state_dim, model.obs_dim, model.horizon);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let mut x = &model.init_state_mean + &self.init_state_factor * normal_vec(&mut rng, m);
        let mut xhat =
            &model.init_estimate_mean + &self.init_estimate_factor * normal_vec(&mut rng, m);

        let mut traj = Trajectory {
            states: Vec::with_capacity(horizon),
            estimates: Vec::with_capacity(horizon),
            controls: Vec::with_capacity(horizon.saturating_sub(1)),
            agent_obs: Vec::with_capacity(horizon),
            exp_obs: None,
            seed,
        };

        for t in 0..horizon {
            let h = &model.h[t];
            let mut y = h * &x + &model.w_scale * normal_vec(&mut rng, k);
            for d in &model.d_list {
                let eps: f64 = rng.sample(StandardNormal);
                y += d * &x * eps;
            }
            traj.states.push(x.clone());
            traj.estimates.push(xhat.clone());
            traj.agent_obs.push(y.clone());
            if t + 1 == horizon {
                break;
            }

            let (a, b) = (&model.a[t], &model.b[t]);
            let u = -(&self.gains.l[t] * &xhat);
            let mut x_next = a * &x + b * &u + &model.v_scale * normal_vec(&mut rng, m);
            for c in &model.c_list {
                let eps: f64 = rng.sample(StandardNormal);
                x_next += c * &u * eps;
            }
            let innovation = y - h * &xhat;
            let xhat_next = a * &xhat
                + b * &u
                + &self.gains.k[t] * innovation
                + &model.e_scale * normal_vec(&mut rng, m);
            traj.controls.push(u);
            x = x_next;
            xhat = xhat_next;
        }
        traj
    }
}

/// Simulates one closed-loop trial; deterministic in `seed`.
pub fn rollout(model: &SystemModel, gains: &GainSchedule, seed: u64) -> Trajectory {
    RolloutPlan::new(model, gains).run(seed)
}

/// Samples `o[t] = M x[t] + N ζ[t]` for every state of a trajectory.
pub fn observe(
    exp: &ExperimenterObservationModel,
    states: &[DVector<f64>],
    seed: u64,
) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x5DEE_CE66_D1CE_5EED));
    let s = exp.obs_dim();
    states
        .iter()
        .map(|x| &exp.obs_map * x + &exp.noise_scale * normal_vec(&mut rng, s))
        .collect()
}

/// Simulates `n_trials` independent trials, optionally with experimenter
/// measurements.
pub fn rollout_batch(
    model: &SystemModel,
    gains: &GainSchedule,
    n_trials: usize,
    seed: u64,
    exp: Option<&ExperimenterObservationModel>,
) -> TrajectoryDataset {
    let plan = RolloutPlan::new(model, gains);
    let trials = (0..n_trials)
        .into_par_iter()
        .map(|i| {
            let trial_seed = derive_trial_seed(seed, i as u64);
            let mut traj = plan.run(trial_seed);
            if let Some(exp) = exp {
                traj.exp_obs = Some(observe(exp, &traj.states, trial_seed));
            }
            traj
        })
        .collect();
    TrajectoryDataset {
        trials,
        model_fingerprint: String::new(),
        seed,
    }
}
