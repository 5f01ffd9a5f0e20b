#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sdnioc::model::{CostModel, ExperimenterObservationModel, SystemModel};

pub fn normal(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
}

fn spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> DMatrix<f64> {
    let g = normal(rng, n, n);
    &g * g.transpose() / n as f64 + DMatrix::identity(n, n) * floor
}

/// Dimensions drawn from the seed: m ≤ 5, p ≤ 3, k ≤ 4, 2 ≤ T ≤ 30.
pub fn random_dims(seed: u64) -> (usize, usize, usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1);
    (
        rng.random_range(1..=5),
        rng.random_range(1..=3),
        rng.random_range(1..=4),
        rng.random_range(2..=30),
    )
}

/// Stable random plain-LQG model with full-rank noise and initial spread.
pub fn random_plain(seed: u64) -> (SystemModel, CostModel) {
    let (m, p, k, horizon) = random_dims(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = normal(&mut rng, m, m) * (0.9 / (m as f64).sqrt());
    let b = normal(&mut rng, m, p);
    let h = normal(&mut rng, k, m);
    let mut model = SystemModel::time_invariant(a, b, h, horizon);
    model.v_scale = normal(&mut rng, m, m) * 0.2;
    model.w_scale = normal(&mut rng, k, k) * 0.3 + DMatrix::identity(k, k) * 0.1;
    model.e_scale = DMatrix::identity(m, m) * 0.01;
    model.init_state_mean = DVector::from_fn(m, |_, _| rng.sample(StandardNormal));
    model.init_state_cov = spd(&mut rng, m, 0.05);
    model.init_estimate_mean = model.init_state_mean.clone();
    model.init_estimate_cov = DMatrix::zeros(m, m);
    let q: Vec<DMatrix<f64>> = (0..horizon).map(|_| spd(&mut rng, m, 0.0)).collect();
    let r: Vec<DMatrix<f64>> = (0..horizon).map(|_| spd(&mut rng, p, 0.1)).collect();
    (model, CostModel { q, r })
}

/// The same family with one control- and one state-dependent noise term.
pub fn random_sdn(seed: u64) -> (SystemModel, CostModel) {
    let (mut model, cost) = random_plain(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5D);
    let (m, p, k) = (model.state_dim, model.control_dim, model.obs_dim);
    model.c_list = vec![normal(&mut rng, m, p) * 0.3];
    model.d_list = vec![normal(&mut rng, k, m) * 0.2];
    (model, cost)
}

pub fn random_observer(seed: u64, m: usize) -> ExperimenterObservationModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0B5);
    let s = rng.random_range(1..=m);
    ExperimenterObservationModel::new(normal(&mut rng, s, m), DMatrix::identity(s, s) * 0.1)
}

pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

/// Textbook finite-horizon LQR gains.
pub fn riccati(model: &SystemModel, cost: &CostModel) -> Vec<DMatrix<f64>> {
    let n = model.horizon;
    let mut s = cost.q[n - 1].clone();
    let mut gains = vec![DMatrix::zeros(model.control_dim, model.state_dim); n];
    for t in (0..n - 1).rev() {
        let (a, b) = (&model.a[t], &model.b[t]);
        let g = &cost.r[t] + b.transpose() * &s * b;
        let l = g.try_inverse().unwrap() * b.transpose() * &s * a;
        s = &cost.q[t] + a.transpose() * &s * a - a.transpose() * &s * b * &l;
        s = (&s + s.transpose()) * 0.5;
        gains[t] = l;
    }
    gains
}

/// Textbook one-step predictor Kalman gains.
pub fn kalman(model: &SystemModel) -> Vec<DMatrix<f64>> {
    let vv = &model.v_scale * model.v_scale.transpose();
    let ww = &model.w_scale * model.w_scale.transpose();
    let ee = &model.e_scale * model.e_scale.transpose();
    let mut p = &model.init_state_cov + &model.init_estimate_cov;
    let mut gains = Vec::with_capacity(model.horizon);
    for t in 0..model.horizon {
        let (a, h) = (&model.a[t], &model.h[t]);
        let s_inv = (h * &p * h.transpose() + &ww).try_inverse().unwrap();
        let k = a * &p * h.transpose() * &s_inv;
        p = a * &p * a.transpose() - a * &p * h.transpose() * &s_inv * h * &p * a.transpose() + &vv + &ee;
        p = (&p + p.transpose()) * 0.5;
        gains.push(k);
    }
    gains
}
