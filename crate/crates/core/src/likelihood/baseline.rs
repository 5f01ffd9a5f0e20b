//! Additive-noise stand-ins for signal-dependent noise.

use nalgebra::DMatrix;

use super::predict_joint_moments;
use crate::model::{GainSchedule, SystemModel};
use crate::simulate::sqrt_factor;

/// Time-averaged covariance injected by the control-dependent terms (into
/// the dynamics) and the state-dependent terms (into the agent's
/// observations) when the agent follows `gains`.
pub fn average_signal_noise(
    model: &SystemModel,
    gains: &GainSchedule,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = model.state_dim;
    let moments = predict_joint_moments(model, gains);
    let mut process = DMatrix::zeros(m, m);
    let mut obs = DMatrix::zeros(model.obs_dim, model.obs_dim);
    let steps = moments.len().saturating_sub(1).max(1) as f64;
    for (t, b) in moments.iter().enumerate() {
        let mu_x = b.mean.rows(0, m);
        let second_x = b.cov.view((0, 0), (m, m)) + mu_x * mu_x.transpose();
        for d in &model.d_list {
            obs += d * &second_x * d.transpose();
        }
        if t + 1 < moments.len() {
            let mu_e = b.mean.rows(m, m);
            let second_e = b.cov.view((m, m), (m, m)) + mu_e * mu_e.transpose();
            for c in &model.c_list {
                let cl = c * &gains.l[t];
                process += &cl * &second_e * cl.transpose();
            }
        }
    }
    (process / steps, obs / moments.len().max(1) as f64)
}

/// Plain-LQG model whose additive noise is inflated by the average
/// signal-dependent noise of `model` under `gains`.
pub fn noise_matched_model(model: &SystemModel, gains: &GainSchedule) -> SystemModel {
    let (process, obs) = average_signal_noise(model, gains);
    let mut plain = model.without_signal_noise();
    plain.v_scale = sqrt_factor(&(model.process_cov() + process));
    plain.w_scale = sqrt_factor(&(model.obs_noise_cov() + obs));
    plain
}
