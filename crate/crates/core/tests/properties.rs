mod common;

use common::{normal, random_observer, random_sdn};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdnioc::config::{parse_model, to_json_string, ModelConfig};
use sdnioc::estimator::apply_params;
use sdnioc::likelihood::{log_likelihood_dataset, log_likelihood_trajectory, LikelihoodOptions};
use sdnioc::linalg::min_eigenvalue;
use sdnioc::metrics::{log_rmse, symmetrized_kl};
use sdnioc::model::{GainSchedule, SystemModel};
use sdnioc::simulate::{rollout_batch, Trajectory, TrajectoryDataset};
use sdnioc::solver::{solve_gains, SolverOptions};
use sdnioc::zoo::{random_problem_scaled, reaching_model, RandomProblemParams, ReachingParams};

fn random_config(seed: u64, with_exp: bool, varying: bool) -> ModelConfig {
    let (mut model, cost) = random_sdn(seed);
    if varying {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7A);
        let m = model.state_dim;
        model.a[0] = normal(&mut rng, m, m);
    }
    let cfg = ModelConfig::new(model, cost);
    if with_exp {
        let m = cfg.model.state_dim;
        cfg.with_exp(random_observer(seed, m))
    } else {
        cfg
    }
}

fn solved(seed: u64) -> (SystemModel, GainSchedule, TrajectoryDataset) {
    let (model, cost) = random_sdn(seed);
    let sol = solve_gains(&model, &cost, SolverOptions::default()).unwrap();
    let data = rollout_batch(&model, &sol.gains, 4, seed, None);
    (model, sol.gains, data)
}

fn loglik(model: &SystemModel, gains: &GainSchedule, data: &TrajectoryDataset) -> f64 {
    log_likelihood_dataset(model, gains, data, None, LikelihoodOptions::default()).unwrap()
}

fn spd(seed: u64, n: usize) -> DMatrix<f64> {
    let g = normal(&mut ChaCha8Rng::seed_from_u64(seed), n, n);
    &g * g.transpose() + DMatrix::identity(n, n) * 0.1
}

fn permutation(seed: u64, m: usize) -> DMatrix<f64> {
    let mut order: Vec<usize> = (0..m).collect();
    rand::seq::SliceRandom::shuffle(&mut order[..], &mut ChaCha8Rng::seed_from_u64(seed));
    DMatrix::from_fn(m, m, |i, j| if order[i] == j { 1.0 } else { 0.0 })
}

/// Relabels the state coordinates of a model, its gains and its data.
fn permuted(
    p: &DMatrix<f64>,
    model: &SystemModel,
    gains: &GainSchedule,
    data: &TrajectoryDataset,
) -> (SystemModel, GainSchedule, TrajectoryDataset) {
    let pt = p.transpose();
    let mut out = model.clone();
    out.a = model.a.iter().map(|a| p * a * &pt).collect();
    out.b = model.b.iter().map(|b| p * b).collect();
    out.h = model.h.iter().map(|h| h * &pt).collect();
    out.v_scale = p * &model.v_scale;
    out.c_list = model.c_list.iter().map(|c| p * c).collect();
    out.d_list = model.d_list.iter().map(|d| d * &pt).collect();
    out.e_scale = p * &model.e_scale;
    out.init_state_mean = p * &model.init_state_mean;
    out.init_state_cov = p * &model.init_state_cov * &pt;
    out.init_estimate_mean = p * &model.init_estimate_mean;
    out.init_estimate_cov = p * &model.init_estimate_cov * &pt;
    let gains = GainSchedule {
        l: gains.l.iter().map(|l| l * &pt).collect(),
        k: gains.k.iter().map(|k| p * k).collect(),
    };
    let map = |v: &[DVector<f64>]| -> Vec<DVector<f64>> { v.iter().map(|x| p * x).collect() };
    let trials = data
        .trials
        .iter()
        .map(|tr| Trajectory {
            states: map(&tr.states),
            estimates: map(&tr.estimates),
            ..tr.clone()
        })
        .collect();
    (out, gains, TrajectoryDataset::new(trials))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn config_survives_a_round_trip(seed in 0u64..1_000_000, with_exp: bool, varying: bool) {
        let cfg = random_config(seed, with_exp, varying);
        let back = parse_model(&to_json_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn random_problem_config_survives_a_round_trip(seed in 0u64..1_000_000) {
        let bundle = random_problem_scaled(&RandomProblemParams { seed, ..Default::default() });
        let cfg = ModelConfig::from_bundle(&bundle);
        let back = parse_model(&to_json_string(&cfg).unwrap()).unwrap();
        prop_assert_eq!(back, cfg);
    }

    #[test]
    fn dataset_loglik_ignores_trial_order_and_doubles(seed in 0u64..1_000_000, shift in 1usize..4) {
        let (model, gains, data) = solved(seed);
        let base = loglik(&model, &gains, &data);
        let mut rotated = data.clone();
        rotated.trials.rotate_left(shift);
        let r = loglik(&model, &gains, &rotated);
        prop_assert!((r - base).abs() <= 1e-9 * base.abs().max(1.0), "{} vs {}", r, base);
        let mut doubled = data.clone();
        doubled.trials.extend(data.trials.iter().cloned());
        let d = loglik(&model, &gains, &doubled);
        prop_assert!((d - 2.0 * base).abs() <= 1e-9 * base.abs().max(1.0), "{} vs {}", d, 2.0 * base);
    }

    #[test]
    fn skl_is_symmetric_and_nonnegative(seed in 0u64..1_000_000, n in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mp, mq) = (normal(&mut rng, n, 1).column(0).into_owned(), normal(&mut rng, n, 1).column(0).into_owned());
        let (cp, cq) = (spd(seed ^ 1, n), spd(seed ^ 2, n));
        let pq = symmetrized_kl(&mp, &cp, &mq, &cq).unwrap();
        let qp = symmetrized_kl(&mq, &cq, &mp, &cp).unwrap();
        prop_assert!(pq >= 0.0);
        prop_assert!((pq - qp).abs() <= 1e-9 * pq.max(1.0));
        prop_assert!(symmetrized_kl(&mp, &cp, &mp, &cp).unwrap() <= 1e-9);
    }

    #[test]
    fn posterior_covariances_are_psd(seed in 0u64..1_000_000, partial: bool) {
        let (model, cost) = random_sdn(seed);
        let exp = random_observer(seed, model.state_dim);
        let exp = partial.then_some(&exp);
        let sol = solve_gains(&model, &cost, SolverOptions::default()).unwrap();
        let data = rollout_batch(&model, &sol.gains, 1, seed, exp);
        let (_, beliefs) =
            log_likelihood_trajectory(&model, &sol.gains, &data.trials[0], exp, LikelihoodOptions::default()).unwrap();
        for b in &beliefs {
            let scale = b.cov.amax().max(1e-12);
            prop_assert!(min_eigenvalue(&b.cov) >= -1e-9 * scale);
        }
    }

    #[test]
    fn log_rmse_is_scale_invariant(seed in 0u64..1_000_000, c in 1e-3f64..1e3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..4).map(|_| 10f64.powf(normal(&mut rng, 1, 1)[0])).collect();
        let est: Vec<f64> = (0..4).map(|_| 10f64.powf(normal(&mut rng, 1, 1)[0])).collect();
        let scaled_t: Vec<f64> = truth.iter().map(|x| x * c).collect();
        let scaled_e: Vec<f64> = est.iter().map(|x| x * c).collect();
        let a = log_rmse(&truth, &est).unwrap();
        let b = log_rmse(&scaled_t, &scaled_e).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        prop_assert!(log_rmse(&truth, &truth).unwrap() == 0.0);
    }

    #[test]
    fn applied_parameters_read_back(seed in 0u64..1_000_000, fractions in prop::collection::vec(0.0f64..1.0, 2)) {
        let bundle = random_problem_scaled(&RandomProblemParams { seed, ..Default::default() });
        let spec = &bundle.spec;
        let y: Vec<f64> = spec.bounds.iter().zip(&fractions).map(|(&(lo, hi), f)| lo + f * (hi - lo)).collect();
        let theta = spec.to_natural(&y);
        let (model, cost) = apply_params(spec, &theta, &bundle.model, &bundle.cost).unwrap();
        for (a, b) in spec.read(&model, &cost).iter().zip(&theta) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs());
        }
    }

    #[test]
    fn loglik_is_invariant_to_relabelling_states(seed in 0u64..1_000_000) {
        let (model, gains, data) = solved(seed);
        let p = permutation(seed, model.state_dim);
        let (pm, pg, pd) = permuted(&p, &model, &gains, &data);
        let a = loglik(&model, &gains, &data);
        let b = loglik(&pm, &pg, &pd);
        prop_assert!((a - b).abs() <= 1e-7 * a.abs().max(1.0), "{} vs {}", a, b);
    }

    #[test]
    fn loglik_is_continuous_in_the_parameters(which in 0usize..3, sign: bool) {
        let b = reaching_model(&ReachingParams::default());
        let data = {
            let sol = solve_gains(&b.model, &b.cost, SolverOptions::default()).unwrap();
            rollout_batch(&b.model, &sol.gains, 5, 3, None)
        };
        let ll = |theta: &[f64]| {
            let (model, cost) = apply_params(&b.spec, theta, &b.model, &b.cost).unwrap();
            let sol = solve_gains(&model, &cost, SolverOptions::default()).unwrap();
            loglik(&model, &sol.gains, &data)
        };
        let theta = b.spec.read(&b.model, &b.cost);
        let base = ll(&theta);
        let mut prev = f64::INFINITY;
        for h in [1e-3, 1e-5, 1e-7] {
            let mut t = theta.clone();
            t[which] *= if sign { 1.0 + h } else { 1.0 - h };
            let d = (ll(&t) - base).abs();
            prop_assert!(d <= prev * 0.5 + 1e-9, "step {}: {} after {}", h, d, prev);
            prev = d;
        }
        prop_assert!(prev <= 1e-3 * base.abs().max(1.0));
    }
}
