//! Joint dynamics of the true state and the agent's estimate, moment-matched
//! propagation through them, and Gaussian conditioning.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, symmetrize_mut};
use crate::model::{ExperimenterObservationModel, GainSchedule, SystemModel};

/// Gaussian over a state, an estimate, or their concatenation.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Self {
        GaussianBelief { mean, cov }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Marginal over the contiguous block `start..start + len`.
    pub fn marginal(&self, start: usize, len: usize) -> GaussianBelief {
        GaussianBelief {
            mean: self.mean.rows(start, len).into_owned(),
            cov: self.cov.view((start, start), (len, len)).into_owned(),
        }
    }
}

/// One-step transition of the stacked vector `[x; x̃]` (plus `o` under
/// partial observability):
///
/// ```text
/// next = (F̄ + Σᵢ εⁱ Sᵢ) x + (F̃ + Σᵢ εⁱ Cᵢ) x̃ + Γ n
/// ```
///
/// where `Sᵢ` are the state-dependent observation-noise terms routed through
/// the filter gain and `Cᵢ` the control-dependent process-noise terms.
#[derive(Clone, Debug)]
pub struct JointDynamics {
    /// Coefficient of the true state (output×m).
    pub f_state: DMatrix<f64>,
    /// Coefficient of the agent's estimate (output×m).
    pub f_estimate: DMatrix<f64>,
    /// Left factor applied to the state-dependent noise: `[0; K; 0]` (output×k).
    pub obs_noise_gain: DMatrix<f64>,
    /// `obs_noise_gain · Dᵢ`, one output×m matrix per state-dependent term.
    pub state_noise: Vec<DMatrix<f64>>,
    /// `[−Cᵢ L; 0; −M Cᵢ L]`, one output×m matrix per control-dependent term.
    pub control_noise: Vec<DMatrix<f64>>,
    /// Additive-noise stack Γ.
    pub gamma: DMatrix<f64>,
    gamma_cov: DMatrix<f64>,
}

impl JointDynamics {
    pub fn output_dim(&self) -> usize {
        self.f_state.nrows()
    }

    /// `[F̄ F̃]`.
    pub fn stacked(&self) -> DMatrix<f64> {
        let (rows, m) = (self.output_dim(), self.f_state.ncols());
        let mut f = DMatrix::zeros(rows, 2 * m);
        f.columns_mut(0, m).copy_from(&self.f_state);
        f.columns_mut(m, m).copy_from(&self.f_estimate);
        f
    }

    pub fn gamma_cov(&self) -> &DMatrix<f64> {
        &self.gamma_cov
    }
}

fn vstack(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks[0].ncols();
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for b in blocks {
        out.rows_mut(r, b.nrows()).copy_from(*b);
        r += b.nrows();
    }
    out
}

fn build(
    model: &SystemModel,
    gains: &GainSchedule,
    t: usize,
    exp: Option<&ExperimenterObservationModel>,
) -> JointDynamics {
    let m = model.state_dim;
    let k_dim = model.obs_dim;
    let (a, b, h) = (&model.a[t], &model.b[t], &model.h[t]);
    let (l, k) = (&gains.l[t], &gains.k[t]);
    let bl = b * l;
    let kh = k * h;
    let est_dyn = a - &bl - &kh;
    let neg_bl = -&bl;
    let zero_mk = DMatrix::zeros(m, k_dim);
    let zero_mm = DMatrix::zeros(m, m);

    let (f_state, f_estimate, obs_noise_gain) = match exp {
        None => (
            vstack(&[a, &kh]),
            vstack(&[&neg_bl, &est_dyn]),
            vstack(&[&zero_mk, k]),
        ),
        Some(e) => {
            let ma = &e.obs_map * a;
            let mbl = &e.obs_map * &neg_bl;
            let zero_sk = DMatrix::zeros(e.obs_dim(), k_dim);
            (
                vstack(&[a, &kh, &ma]),
                vstack(&[&neg_bl, &est_dyn, &mbl]),
                vstack(&[&zero_mk, k, &zero_sk]),
            )
        }
    };

    let state_noise = model.d_list.iter().map(|d| &obs_noise_gain * d).collect();
    let control_noise = model
        .c_list
        .iter()
        .map(|c| {
            let cl = -(c * l);
            match exp {
                None => vstack(&[&cl, &zero_mm]),
                Some(e) => vstack(&[&cl, &zero_mm, &(&e.obs_map * &cl)]),
            }
        })
        .collect();

    // Γ columns: process noise ξ, agent observation noise ω, estimation
    // noise η and (partial observability) experimenter noise ζ.
    let kw = k * &model.w_scale;
    let gamma = match exp {
        None => {
            let mut g = DMatrix::zeros(2 * m, m + k_dim + m);
            g.view_mut((0, 0), (m, m)).copy_from(&model.v_scale);
            g.view_mut((m, m), (m, k_dim)).copy_from(&kw);
            g.view_mut((m, m + k_dim), (m, m)).copy_from(&model.e_scale);
            g
        }
        Some(e) => {
            let s = e.obs_dim();
            let mut g = DMatrix::zeros(2 * m + s, m + k_dim + m + s);
            g.view_mut((0, 0), (m, m)).copy_from(&model.v_scale);
            g.view_mut((m, m), (m, k_dim)).copy_from(&kw);
            g.view_mut((m, m + k_dim), (m, m)).copy_from(&model.e_scale);
            g.view_mut((2 * m, 0), (s, m))
                .copy_from(&(&e.obs_map * &model.v_scale));
            g.view_mut((2 * m, 2 * m + k_dim), (s, s))
                .copy_from(&e.noise_scale);
            g
        }
    };
    let gamma_cov = &gamma * gamma.transpose();

    JointDynamics {
        f_state,
        f_estimate,
        obs_noise_gain,
        state_noise,
        control_noise,
        gamma,
        gamma_cov,
    }
}

/// Joint transition of `[x; x̃]` at step `t` when the experimenter sees the state.
pub fn build_joint_dynamics_full(
    model: &SystemModel,
    gains: &GainSchedule,
    t: usize,
) -> JointDynamics {
    build(model, gains, t, None)
}

/// Joint transition of `[x; x̃; o]` at step `t` under experimenter partial observability.
pub fn build_joint_dynamics_partial(
    model: &SystemModel,
    exp: &ExperimenterObservationModel,
    gains: &GainSchedule,
    t: usize,
) -> JointDynamics {
    build(model, gains, t, Some(exp))
}

/// Propagates a Gaussian belief through the joint dynamics and returns the
/// Gaussian with the same first two moments as the (non-Gaussian) result.
///
/// With `observed_state = Some(x)` the prior is over the estimate `x̃` alone
/// and `x` is treated as known. Otherwise the prior is over `[x; x̃]`.
pub fn propagate_moment_matched(
    jd: &JointDynamics,
    prior: &GaussianBelief,
    observed_state: Option<&DVector<f64>>,
) -> GaussianBelief {
    let mut cov = jd.gamma_cov.clone();
    let mean;
    match observed_state {
        Some(x) => {
            let mu = &prior.mean;
            mean = &jd.f_state * x + &jd.f_estimate * mu;
            let fe = &jd.f_estimate * &prior.cov;
            cov.gemm(1.0, &fe, &jd.f_estimate.transpose(), 1.0);
            if !jd.state_noise.is_empty() {
                for sn in &jd.state_noise {
                    let v = sn * x;
                    cov.ger(1.0, &v, &v, 1.0);
                }
            }
            if !jd.control_noise.is_empty() {
                let second = &prior.cov + mu * mu.transpose();
                for cn in &jd.control_noise {
                    let tmp = cn * &second;
                    cov.gemm(1.0, &tmp, &cn.transpose(), 1.0);
                }
            }
        }
        None => {
            let m = jd.f_state.ncols();
            let f = jd.stacked();
            mean = &f * &prior.mean;
            let tmp = &f * &prior.cov;
            cov.gemm(1.0, &tmp, &f.transpose(), 1.0);
            if !jd.state_noise.is_empty() {
                let mu_x = prior.mean.rows(0, m);
                let second = prior.cov.view((0, 0), (m, m)) + mu_x * mu_x.transpose();
                for sn in &jd.state_noise {
                    let tmp = sn * &second;
                    cov.gemm(1.0, &tmp, &sn.transpose(), 1.0);
                }
            }
            if !jd.control_noise.is_empty() {
                let mu_e = prior.mean.rows(m, m);
                let second = prior.cov.view((m, m), (m, m)) + mu_e * mu_e.transpose();
                for cn in &jd.control_noise {
                    let tmp = cn * &second;
                    cov.gemm(1.0, &tmp, &cn.transpose(), 1.0);
                }
            }
        }
    }
    symmetrize_mut(&mut cov);
    GaussianBelief { mean, cov }
}

/// Which contiguous block of a joint Gaussian is observed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ObservedBlock {
    /// The first `n` components.
    Head(usize),
    /// The last `n` components.
    Tail(usize),
}

/// Conditions a joint Gaussian on an observed block.
///
/// Returns the log-density of the observation under the block's marginal and
/// the posterior over the remaining components.
pub fn condition_gaussian(
    joint: &GaussianBelief,
    observed: &DVector<f64>,
    block: ObservedBlock,
) -> Result<(f64, GaussianBelief)> {
    let n = joint.dim();
    let (obs_start, obs_len, lat_start) = match block {
        ObservedBlock::Head(len) => (0, len, len),
        ObservedBlock::Tail(len) => (n - len, len, 0),
    };
    let lat_len = n - obs_len;
    if observed.len() != obs_len || obs_len > n {
        return Err(Error::Shape(format!(
            "observed block has length {}, expected {obs_len}",
            observed.len()
        )));
    }
    let s_oo = joint.cov.view((obs_start, obs_start), (obs_len, obs_len));
    let s_lo = joint.cov.view((lat_start, obs_start), (lat_len, obs_len));
    let s_ll = joint.cov.view((lat_start, lat_start), (lat_len, lat_len));
    let mu_o = joint.mean.rows(obs_start, obs_len);
    let mu_l = joint.mean.rows(lat_start, lat_len);

    let chol = linalg::cholesky_jitter(&linalg::symmetrize(&s_oo.into_owned())).ok_or(
        Error::Singular {
            what: "observed-block marginal covariance",
            t: 0,
        },
    )?;
    let residual = observed - mu_o;
    let log_factor = linalg::gaussian_logpdf_chol(&chol, &residual);

    // gain = S_lo S_oo⁻¹ computed as (S_oo⁻¹ S_ol)ᵀ.
    let gain = chol.solve(&s_lo.transpose()).transpose();
    let mean = mu_l + &gain * residual;
    let mut cov = s_ll - &gain * s_lo.transpose();
    symmetrize_mut(&mut cov);
    Ok((log_factor, GaussianBelief { mean, cov }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bivariate_conditioning() {
        let joint = GaussianBelief::new(
            DVector::zeros(2),
            DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 2.0]),
        );
        let (f, post) =
            condition_gaussian(&joint, &DVector::from_element(1, 1.0), ObservedBlock::Head(1))
                .unwrap();
        assert!((post.mean[0] - 0.5).abs() < 1e-15);
        assert!((post.cov[(0, 0)] - 1.5).abs() < 1e-15);
        let expected = -0.5 * (2.0 * std::f64::consts::PI * 2.0).ln() - 0.25;
        assert!((f - expected).abs() < 1e-14);
    }

    #[test]
    fn independent_blocks_leave_latent_unchanged() {
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.3, 0.0, 0.3, 1.0]);
        let joint = GaussianBelief::new(DVector::from_vec(vec![0.5, -1.0, 2.0]), cov);
        let (_, post) =
            condition_gaussian(&joint, &DVector::from_element(1, 3.0), ObservedBlock::Head(1))
                .unwrap();
        assert_eq!(post, joint.marginal(1, 2));
    }

    #[test]
    fn observing_the_mean_keeps_latent_mean() {
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.4, 0.2, 2.0, 0.3, 0.4, 0.3, 1.0]);
        let joint = GaussianBelief::new(DVector::from_vec(vec![0.5, -1.0, 2.0]), cov);
        let (_, post) =
            condition_gaussian(&joint, &DVector::from_element(1, 2.0), ObservedBlock::Tail(1))
                .unwrap();
        assert_eq!(post.mean, DVector::from_vec(vec![0.5, -1.0]));
    }
}
