//! Approximately optimal controller and filter gains for LQG problems with
//! signal-dependent noise.
//!
//! With control- or state-dependent noise the separation principle no longer
//! holds, so the controller gains `L` and filter gains `K` are computed by
//! alternating a backward pass (optimal `L` for fixed `K`) with a forward pass
//! (optimal `K` for fixed `L`) until the expected cost stops changing.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg::{self, symmetrize_mut};
use crate::model::{CostModel, GainSchedule, SystemModel};

/// Cost-to-go terms produced by [`backward_pass`].
///
/// The expected cost-to-go at step `t` is `xᵀ Vx[t] x + eᵀ Ve[t] e + s[t]`
/// where `e = x − x̃` is the agent's estimation error.
#[derive(Clone, Debug)]
pub struct ControlPassState {
    pub vx: Vec<DMatrix<f64>>,
    pub ve: Vec<DMatrix<f64>>,
    pub s: Vec<f64>,
}

/// Second-moment recursions produced by [`forward_pass`].
#[derive(Clone, Debug)]
pub struct FilterPassState {
    /// Estimation-error second moment `E[e eᵀ]`.
    pub sig_e: Vec<DMatrix<f64>>,
    /// Estimate second moment `E[x̃ x̃ᵀ]`.
    pub sig_xt: Vec<DMatrix<f64>>,
    /// Cross moment `E[x̃ eᵀ]`.
    pub sig_xe: Vec<DMatrix<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub max_iters: usize,
    /// Relative change in expected cost below which the alternation stops.
    pub tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_iters: 50,
            tol: 1e-9,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub gains: GainSchedule,
    pub expected_cost: f64,
    pub iters_used: usize,
    pub converged: bool,
    /// Expected cost after the initial pure-control pass and each alternation.
    pub cost_history: Vec<f64>,
    pub control: ControlPassState,
    pub filter: Option<FilterPassState>,
}

/// Optimal controller gains for fixed filter gains.
pub fn backward_pass(
    model: &SystemModel,
    cost: &CostModel,
    k_seq: &[DMatrix<f64>],
) -> Result<(Vec<DMatrix<f64>>, ControlPassState)> {
    let (m, p) = (model.state_dim, model.control_dim);
    let horizon = model.horizon;
    if k_seq.len() != horizon {
        return Err(crate::Error::Shape(format!(
            "expected {horizon} filter gains, got {}",
            k_seq.len()
        )));
    }
    let vv = model.process_cov();
    let ee = model.estimation_noise_cov();
    let ww = model.obs_noise_cov();

    let mut vx = vec![DMatrix::zeros(m, m); horizon];
    let mut ve = vec![DMatrix::zeros(m, m); horizon];
    let mut s = vec![0.0; horizon];
    let mut l_seq = vec![DMatrix::zeros(p, m); horizon];
    vx[horizon - 1] = cost.q[horizon - 1].clone();

    for t in (0..horizon.saturating_sub(1)).rev() {
        let (a, b, h, k) = (&model.a[t], &model.b[t], &model.h[t], &k_seq[t]);
        let vx_next = &vx[t + 1];
        let ve_next = &ve[t + 1];
        let bt_vx = b.transpose() * vx_next;

        let mut g = &cost.r[t] + &bt_vx * b;
        if !model.c_list.is_empty() {
            let v_sum = vx_next + ve_next;
            for c in &model.c_list {
                g += c.transpose() * &v_sum * c;
            }
        }
        let l = linalg::spd_solve(&g, &(&bt_vx * a), "control Hessian", t)?;

        let a_cl = a - b * &l;
        let mut vx_t = &cost.q[t] + a.transpose() * vx_next * &a_cl;
        if !model.d_list.is_empty() {
            let kt_ve_k = k.transpose() * ve_next * k;
            for d in &model.d_list {
                vx_t += d.transpose() * &kt_ve_k * d;
            }
        }
        let a_est = a - k * h;
        let mut ve_t = a.transpose() * vx_next * b * &l + a_est.transpose() * ve_next * &a_est;
        symmetrize_mut(&mut vx_t);
        symmetrize_mut(&mut ve_t);

        let est_noise = &vv + &ee + k * &ww * k.transpose();
        s[t] = (vx_next * &vv).trace() + (ve_next * est_noise).trace() + s[t + 1];

        vx[t] = vx_t;
        ve[t] = ve_t;
        l_seq[t] = l;
    }
    Ok((l_seq, ControlPassState { vx, ve, s }))
}

/// Initial second moments of the estimation error and the estimate.
fn initial_moments(model: &SystemModel) -> (DMatrix<f64>, DMatrix<f64>, DMatrix<f64>) {
    let mu = &model.init_state_mean;
    let mu_hat = &model.init_estimate_mean;
    let diff: DVector<f64> = mu - mu_hat;
    let sig_e = &model.init_state_cov + &model.init_estimate_cov + &diff * diff.transpose();
    let sig_xt = mu_hat * mu_hat.transpose() + &model.init_estimate_cov;
    let sig_xe = mu_hat * diff.transpose() - &model.init_estimate_cov;
    (sig_e, sig_xt, sig_xe)
}

/// Optimal filter gains for fixed controller gains.
pub fn forward_pass(
    model: &SystemModel,
    l_seq: &[DMatrix<f64>],
) -> Result<(Vec<DMatrix<f64>>, FilterPassState)> {
    let horizon = model.horizon;
    if l_seq.len() != horizon {
        return Err(crate::Error::Shape(format!(
            "expected {horizon} controller gains, got {}",
            l_seq.len()
        )));
    }
    let vv = model.process_cov();
    let ee = model.estimation_noise_cov();
    let ww = model.obs_noise_cov();

    let (mut sig_e, mut sig_xt, mut sig_xe) = initial_moments(model);
    let mut k_seq = Vec::with_capacity(horizon);
    let mut state = FilterPassState {
        sig_e: Vec::with_capacity(horizon),
        sig_xt: Vec::with_capacity(horizon),
        sig_xe: Vec::with_capacity(horizon),
    };

    for t in 0..horizon {
        let (a, b, h, l) = (&model.a[t], &model.b[t], &model.h[t], &l_seq[t]);
        let mut innov = h * &sig_e * h.transpose() + &ww;
        if !model.d_list.is_empty() {
            let sig_x = &sig_e + &sig_xt + &sig_xe + sig_xe.transpose();
            for d in &model.d_list {
                innov += d * &sig_x * d.transpose();
            }
        }
        // K = A Σe Hᵀ S⁻¹, computed as (S⁻¹ H Σe Aᵀ)ᵀ with S symmetric.
        let rhs = h * &sig_e * a.transpose();
        let k = linalg::spd_solve(&innov, &rhs, "innovation covariance", t)?.transpose();

        if t + 1 < horizon {
            let a_cl = a - b * l;
            let a_est = a - &k * h;
            let kh = &k * h;

            let mut next_e = &vv + &ee + &a_est * &sig_e * a.transpose();
            for c in &model.c_list {
                let cl = c * l;
                next_e += &cl * &sig_xt * cl.transpose();
            }
            let cross = &a_cl * &sig_xe * &kh.transpose();
            let mut next_xt = &ee
                + &kh * &sig_e * a.transpose()
                + &a_cl * &sig_xt * a_cl.transpose()
                + &cross
                + cross.transpose();
            let next_xe = &a_cl * &sig_xe * a_est.transpose() - &ee;
            symmetrize_mut(&mut next_e);
            symmetrize_mut(&mut next_xt);

            state.sig_e.push(std::mem::replace(&mut sig_e, next_e));
            state.sig_xt.push(std::mem::replace(&mut sig_xt, next_xt));
            state.sig_xe.push(std::mem::replace(&mut sig_xe, next_xe));
        } else {
            state.sig_e.push(sig_e.clone());
            state.sig_xt.push(sig_xt.clone());
            state.sig_xe.push(sig_xe.clone());
        }
        k_seq.push(k);
    }
    Ok((k_seq, state))
}

/// Total expected cost of the policy whose cost-to-go is `state`.
pub fn expected_cost(state: &ControlPassState, model: &SystemModel) -> f64 {
    let mu = &model.init_state_mean;
    let mu_hat = &model.init_estimate_mean;
    let diff: DVector<f64> = mu - mu_hat;
    let vx = &state.vx[0];
    let ve = &state.ve[0];
    let state_term = (mu.transpose() * vx * mu)[(0, 0)] + (vx * &model.init_state_cov).trace();
    let err_cov = &model.init_state_cov + &model.init_estimate_cov;
    let error_term = (diff.transpose() * ve * &diff)[(0, 0)] + (ve * err_cov).trace();
    state_term + error_term + state.s[0]
}

/// Alternates backward and forward passes starting from zero filter gains.
///
/// Running out of iterations is not an error; check [`Solution::converged`].
pub fn solve_gains(model: &SystemModel, cost: &CostModel, opts: SolverOptions) -> Result<Solution> {
    let (m, k) = (model.state_dim, model.obs_dim);
    let zero_k = vec![DMatrix::zeros(m, k); model.horizon];
    let (mut l_seq, mut control) = backward_pass(model, cost, &zero_k)?;
    let mut k_seq = zero_k;
    let mut filter = None;
    let mut cost_value = expected_cost(&control, model);
    let mut history = vec![cost_value];
    let mut converged = false;
    let mut iters = 0;

    while iters < opts.max_iters {
        iters += 1;
        let (k_new, f_state) = forward_pass(model, &l_seq)?;
        let (l_new, c_state) = backward_pass(model, cost, &k_new)?;
        let new_cost = expected_cost(&c_state, model);
        k_seq = k_new;
        l_seq = l_new;
        control = c_state;
        filter = Some(f_state);
        history.push(new_cost);
        let change = (new_cost - cost_value).abs();
        cost_value = new_cost;
        if !new_cost.is_finite() {
            return Err(crate::Error::NonFinite("expected cost".into()));
        }
        if change <= opts.tol * new_cost.abs() {
            converged = true;
            break;
        }
    }

    Ok(Solution {
        gains: GainSchedule { l: l_seq, k: k_seq },
        expected_cost: cost_value,
        iters_used: iters,
        converged,
        cost_history: history,
        control,
        filter,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn two_step() -> (SystemModel, CostModel) {
        let model = SystemModel::time_invariant(scalar(1.0), scalar(1.0), scalar(1.0), 2);
        let cost = CostModel {
            q: vec![scalar(0.0), scalar(1.0)],
            r: vec![scalar(1.0), scalar(1.0)],
        };
        (model, cost)
    }

    #[test]
    fn scalar_two_step_gain() {
        // L₁ = (R + B Q₂ B)⁻¹ B Q₂ A = 1 / 2.
        let (model, cost) = two_step();
        let (l, state) = backward_pass(&model, &cost, &[scalar(0.0), scalar(0.0)]).unwrap();
        assert!((l[0][(0, 0)] - 0.5).abs() < 1e-15);
        assert_eq!(state.vx[1], cost.q[1]);
        assert_eq!(state.ve[1][(0, 0)], 0.0);
        assert_eq!(state.s[1], 0.0);
    }

    #[test]
    fn noiseless_expected_cost_is_rollout_cost() {
        let (mut model, cost) = two_step();
        model.init_state_mean[0] = 1.0;
        model.init_estimate_mean[0] = 1.0;
        let sol = solve_gains(&model, &cost, SolverOptions::default()).unwrap();
        // x₁ = 1, u₁ = −0.5, x₂ = 0.5: cost = 0·1 + 0.25 + 0.25.
        assert!((sol.expected_cost - 0.5).abs() < 1e-14);
    }

    #[test]
    fn zero_state_zero_noise_costs_nothing() {
        let (model, cost) = two_step();
        let sol = solve_gains(&model, &cost, SolverOptions::default()).unwrap();
        assert_eq!(sol.expected_cost, 0.0);
        assert!(sol.converged);
    }

    #[test]
    fn uninformative_observations_give_tiny_filter_gain() {
        let (mut model, _) = two_step();
        model.horizon = 5;
        model.a = vec![scalar(0.9); 5];
        model.b = vec![scalar(1.0); 5];
        model.h = vec![scalar(1.0); 5];
        model.v_scale = scalar(0.3);
        model.init_state_cov = scalar(1.0);
        model.w_scale = scalar(1e6);
        let (k, _) = forward_pass(&model, &vec![scalar(0.2); 5]).unwrap();
        assert!(k.iter().all(|k| k.norm() <= 1e-4));
    }

    #[test]
    fn zero_uncertainty_never_updates() {
        let (mut model, _) = two_step();
        model.horizon = 4;
        model.a = vec![scalar(1.1); 4];
        model.b = vec![scalar(1.0); 4];
        model.h = vec![scalar(1.0); 4];
        model.w_scale = scalar(0.5);
        model.c_list.push(scalar(0.4));
        let (k, _) = forward_pass(&model, &vec![scalar(0.3); 4]).unwrap();
        assert!(k.iter().all(|k| k[(0, 0)] == 0.0));
    }
}
