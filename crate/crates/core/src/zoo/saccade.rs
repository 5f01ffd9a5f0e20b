//! Horizontal saccades: a viscous-inertial eye plant driven by a first-order
//! muscle, fixating an initial angle and then a target angle.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ProblemBundle;
use crate::estimator::{Binding, MatrixPath, ParamSpec};
use crate::model::{CostModel, SystemModel};

pub const ANGLE: usize = 0;
pub const VELOCITY: usize = 1;
pub const ACTIVATION: usize = 2;
pub const TARGET: usize = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SaccadeParams {
    /// Effort weight.
    pub r: f64,
    /// Timestep (s).
    pub dt: f64,
    /// Initial and target eye angles (deg).
    pub initial_angle: f64,
    pub target_angle: f64,
    /// Trial duration (s).
    pub duration: f64,
    /// Time after which the eye should fixate the target (s).
    pub fixation_start: f64,
    /// Weight on the eye velocity during fixation, relative to the angle error.
    pub velocity_weight: f64,
    /// Plant and muscle time constants (s).
    pub tau_plant: f64,
    pub tau_muscle: f64,
    /// Control-dependent noise as a fraction of the control signal.
    pub control_noise: f64,
    /// Per-step additive noise standard deviation for each state component.
    pub process_sd: [f64; 4],
    /// Agent's sensor noise on angle and velocity.
    pub sensor_sd: [f64; 2],
    pub init_sd: [f64; 4],
}

impl Default for SaccadeParams {
    fn default() -> Self {
        SaccadeParams {
            r: 1e-4,
            dt: 0.00125,
            initial_angle: -10.0,
            target_angle: 10.0,
            duration: 0.1,
            fixation_start: 0.05,
            velocity_weight: 0.01,
            tau_plant: 0.02,
            tau_muscle: 0.005,
            control_noise: 0.2,
            process_sd: [0.01, 0.5, 5.0, 1e-6],
            sensor_sd: [0.2, 10.0],
            init_sd: [0.05, 0.5, 5.0, 1e-6],
        }
    }
}

impl SaccadeParams {
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

/// Builds the saccade problem with the effort weight `r` as its only parameter.
pub fn saccade_model(p: &SaccadeParams) -> ProblemBundle {
    let m = 4;
    let horizon = p.steps() + 1;
    let dt = p.dt;

    let mut a = DMatrix::identity(m, m);
    a[(ANGLE, VELOCITY)] = dt;
    a[(VELOCITY, VELOCITY)] = 1.0 - dt / p.tau_plant;
    a[(VELOCITY, ACTIVATION)] = dt / p.tau_plant;
    a[(ACTIVATION, ACTIVATION)] = 1.0 - dt / p.tau_muscle;
    let mut b = DMatrix::zeros(m, 1);
    b[(ACTIVATION, 0)] = dt / p.tau_muscle;
    let mut h = DMatrix::zeros(2, m);
    h[(0, ANGLE)] = 1.0;
    h[(1, VELOCITY)] = 1.0;

    let mut model = SystemModel::time_invariant(a, b.clone(), h, horizon);
    model.v_scale = DMatrix::from_diagonal(&DVector::from_row_slice(&p.process_sd));
    model.c_list = vec![b * p.control_noise];
    model.w_scale = DMatrix::from_diagonal(&DVector::from_row_slice(&p.sensor_sd));
    let mut mean = DVector::zeros(m);
    mean[ANGLE] = p.initial_angle;
    mean[TARGET] = p.target_angle;
    model.init_state_mean = mean.clone();
    model.init_state_cov =
        DMatrix::from_diagonal(&DVector::from_row_slice(&p.init_sd).map(|s| s * s));
    model.init_estimate_mean = mean;

    let mut fix = DMatrix::zeros(m, m);
    fix[(ANGLE, ANGLE)] = 1.0;
    fix[(TARGET, TARGET)] = 1.0;
    fix[(ANGLE, TARGET)] = -1.0;
    fix[(TARGET, ANGLE)] = -1.0;
    fix[(VELOCITY, VELOCITY)] = p.velocity_weight.powi(2);
    let fix_step = (p.fixation_start / dt).round() as usize;
    let q = (0..horizon)
        .map(|t| if t >= fix_step { fix.clone() } else { DMatrix::zeros(m, m) })
        .collect();
    let cost = CostModel {
        q,
        r: vec![DMatrix::from_element(1, 1, p.r); horizon],
    };

    let mut spec = ParamSpec::default();
    spec.push_log("r", p.r, vec![Binding::entry(MatrixPath::R, 0, 0)]);
    ProblemBundle {
        model,
        cost,
        spec,
        truth: vec![p.r],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;
    use crate::simulate::rollout;
    use crate::solver::{solve_gains, SolverOptions};

    #[test]
    fn saccade_lands_on_target() {
        let bundle = saccade_model(&SaccadeParams::default());
        assert!(validate_model(&bundle.model, &bundle.cost).passed());
        let model = bundle.model.noiseless();
        let sol = solve_gains(&model, &bundle.cost, SolverOptions::default()).unwrap();
        let traj = rollout(&model, &sol.gains, 0);
        let end = traj.states.last().unwrap();
        assert!((end[ANGLE] - 10.0).abs() < 0.5, "{}", end[ANGLE]);
    }

    #[test]
    fn huge_effort_cost_keeps_the_eye_still() {
        let bundle = saccade_model(&SaccadeParams {
            r: 1e6,
            ..Default::default()
        });
        let model = bundle.model.noiseless();
        let sol = solve_gains(&model, &bundle.cost, SolverOptions::default()).unwrap();
        let traj = rollout(&model, &sol.gains, 0);
        assert!(traj.states.iter().all(|x| (x[ANGLE] + 10.0).abs() < 0.1));
    }
}
