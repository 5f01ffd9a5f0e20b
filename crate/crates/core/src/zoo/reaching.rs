//! Single-joint reaching: a point mass driven through two cascaded
//! first-order muscle filters, with control-dependent motor noise.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ProblemBundle;
use crate::estimator::{Binding, MatrixPath, ParamSpec, TimeSelector};
use crate::model::{CostModel, ExperimenterObservationModel, SystemModel};

/// State layout.
pub const POSITION: usize = 0;
pub const VELOCITY: usize = 1;
pub const FORCE: usize = 2;
pub const EXCITATION: usize = 3;
pub const TARGET: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReachingParams {
    /// Control effort weight.
    pub r: f64,
    /// Terminal velocity weight.
    pub v: f64,
    /// Terminal force weight.
    pub f: f64,
    /// Target position (m).
    pub target: f64,
    /// Timestep (s).
    pub dt: f64,
    /// Movement duration (s).
    pub duration: f64,
    /// Moved mass (kg).
    pub mass: f64,
    /// Muscle filter time constants (s).
    pub tau1: f64,
    pub tau2: f64,
    /// Control-dependent noise as a fraction of the control signal.
    pub control_noise: f64,
    /// Per-step additive noise standard deviation for each state component.
    pub process_sd: [f64; 5],
    /// Standard deviation of the agent's position sensor (m).
    pub sensor_sd: f64,
    /// Standard deviation of the initial state for each component.
    pub init_sd: [f64; 5],
}

impl Default for ReachingParams {
    fn default() -> Self {
        ReachingParams {
            r: 1e-5,
            v: 0.2,
            f: 0.02,
            target: 0.15,
            dt: 0.01,
            duration: 0.35,
            mass: 1.0,
            tau1: 0.04,
            tau2: 0.04,
            control_noise: 0.5,
            process_sd: [1e-4, 1e-3, 1e-2, 1e-2, 1e-6],
            sensor_sd: 2e-3,
            init_sd: [1e-4, 1e-3, 1e-2, 1e-2, 1e-6],
        }
    }
}

impl ReachingParams {
    /// Number of control steps `M`.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn truth(&self) -> Vec<f64> {
        vec![self.r, self.v, self.f]
    }
}

/// Builds the reaching problem with `(r, v, f)` exposed as log-space parameters.
pub fn reaching_model(p: &ReachingParams) -> ProblemBundle {
    let m = 5;
    let steps = p.steps();
    let horizon = steps + 1;
    let dt = p.dt;

    let mut a = DMatrix::identity(m, m);
    a[(POSITION, VELOCITY)] = dt;
    a[(VELOCITY, FORCE)] = dt / p.mass;
    a[(FORCE, FORCE)] = 1.0 - dt / p.tau2;
    a[(FORCE, EXCITATION)] = dt / p.tau2;
    a[(EXCITATION, EXCITATION)] = 1.0 - dt / p.tau1;
    let mut b = DMatrix::zeros(m, 1);
    b[(EXCITATION, 0)] = dt / p.tau1;
    let mut h = DMatrix::zeros(1, m);
    h[(0, POSITION)] = 1.0;

    let mut model = SystemModel::time_invariant(a, b.clone(), h, horizon);
    model.v_scale = DMatrix::from_diagonal(&DVector::from_row_slice(&p.process_sd));
    model.c_list = vec![b * p.control_noise];
    model.w_scale = DMatrix::from_element(1, 1, p.sensor_sd);
    let mut mean = DVector::zeros(m);
    mean[TARGET] = p.target;
    model.init_state_mean = mean.clone();
    model.init_state_cov =
        DMatrix::from_diagonal(&DVector::from_row_slice(&p.init_sd).map(|s| s * s));
    model.init_estimate_mean = mean;

    let mut qt = DMatrix::zeros(m, m);
    qt[(POSITION, POSITION)] = 1.0;
    qt[(TARGET, TARGET)] = 1.0;
    qt[(POSITION, TARGET)] = -1.0;
    qt[(TARGET, POSITION)] = -1.0;
    qt[(VELOCITY, VELOCITY)] = p.v * p.v;
    qt[(FORCE, FORCE)] = p.f * p.f;
    let mut q = vec![DMatrix::zeros(m, m); horizon];
    q[horizon - 1] = qt;
    let r_step = 1.0 / (steps as f64 - 1.0).max(1.0);
    let cost = CostModel {
        q,
        r: vec![DMatrix::from_element(1, 1, p.r * r_step); horizon],
    };

    let mut spec = ParamSpec::default();
    spec.push_log(
        "r",
        p.r,
        vec![Binding::entry(MatrixPath::R, 0, 0).scaled(r_step)],
    );
    spec.push_log(
        "v",
        p.v,
        vec![Binding::entry(MatrixPath::Q, VELOCITY, VELOCITY)
            .at(TimeSelector::Last)
            .pow(2.0)],
    );
    spec.push_log(
        "f",
        p.f,
        vec![Binding::entry(MatrixPath::Q, FORCE, FORCE)
            .at(TimeSelector::Last)
            .pow(2.0)],
    );

    ProblemBundle {
        model,
        cost,
        spec,
        truth: p.truth(),
    }
}

/// Experimenter measuring only the hand position.
pub fn position_observer(noise_sd: f64) -> ExperimenterObservationModel {
    ExperimenterObservationModel::select(5, &[POSITION], noise_sd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimator::apply_params;
    use crate::model::validate_model;
    use crate::simulate::rollout;
    use crate::solver::{solve_gains, SolverOptions};

    #[test]
    fn valid_and_parameterized() {
        let p = ReachingParams::default();
        let bundle = reaching_model(&p);
        assert!(validate_model(&bundle.model, &bundle.cost).passed());
        assert_eq!(bundle.spec.names, ["r", "v", "f"]);
        assert_eq!(bundle.model.horizon, 36);
        let (m2, c2) =
            apply_params(&bundle.spec, &p.truth(), &bundle.model, &bundle.cost).unwrap();
        assert_eq!(m2, bundle.model);
        for (x, y) in c2.q.iter().chain(&c2.r).zip(bundle.cost.q.iter().chain(&bundle.cost.r)) {
            assert!((x - y).amax() < 1e-18);
        }
    }

    #[test]
    fn noiseless_endpoint_reaches_target() {
        let p = ReachingParams {
            v: 0.0,
            f: 0.0,
            r: 1e-9,
            ..Default::default()
        };
        let bundle = reaching_model(&p);
        let model = bundle.model.noiseless();
        let sol = solve_gains(&model, &bundle.cost, SolverOptions::default()).unwrap();
        let traj = rollout(&model, &sol.gains, 0);
        let end = traj.states.last().unwrap();
        assert!((end[POSITION] - p.target).abs() < 1e-6, "{}", end[POSITION]);
    }
}
