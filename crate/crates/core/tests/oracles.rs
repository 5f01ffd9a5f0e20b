mod common;

use common::{kalman, random_observer, random_plain, riccati};
use nalgebra::DMatrix;
use proptest::prelude::*;
use sdnioc::likelihood::{exact_plain_lqg_loglik, log_likelihood_trajectory, LikelihoodOptions};
use sdnioc::simulate::rollout_batch;
use sdnioc::solver::{solve_gains, SolverOptions};

fn assert_close(ours: &[DMatrix<f64>], oracle: &[DMatrix<f64>], what: &str, tol: f64) {
    assert_eq!(ours.len(), oracle.len());
    for (t, (x, y)) in ours.iter().zip(oracle).enumerate() {
        let scale = y.amax().max(1.0);
        let d = (x - y).amax();
        assert!(d <= tol * scale, "{what}[{t}] differs by {d:e} (scale {scale:e})");
    }
}

#[test]
fn gains_match_riccati_and_kalman_on_fixed_models() {
    for seed in 0..20 {
        let (model, cost) = random_plain(seed);
        let sol = solve_gains(&model, &cost, SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert_close(&sol.gains.l, &riccati(&model, &cost), "L", 1e-10);
        assert_close(&sol.gains.k, &kalman(&model), "K", 1e-10);
    }
}

fn check_exact_reduction(seed: u64, partial: bool) {
    let (model, cost) = random_plain(seed);
    let exp = random_observer(seed, model.state_dim);
    let exp = partial.then_some(&exp);
    let sol = solve_gains(&model, &cost, SolverOptions::default()).unwrap();
    let data = rollout_batch(&model, &sol.gains, 3, seed, exp);
    for tr in &data.trials {
        for include_initial in [true, false] {
            let opts = LikelihoodOptions { include_initial };
            let (approx, _) = log_likelihood_trajectory(&model, &sol.gains, tr, exp, opts).unwrap();
            let exact = exact_plain_lqg_loglik(&model, &sol.gains, tr, exp, opts).unwrap();
            assert!(
                (approx - exact).abs() <= 1e-8,
                "seed {seed}, partial {partial}, initial {include_initial}: {approx} vs {exact}"
            );
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn approximate_likelihood_is_exact_without_signal_noise(seed in 1000u64..1_000_000, partial: bool) {
        check_exact_reduction(seed, partial);
    }

    #[test]
    fn gains_match_oracles(seed in 1000u64..1_000_000) {
        let (model, cost) = random_plain(seed);
        let sol = solve_gains(&model, &cost, SolverOptions::default()).unwrap();
        assert_close(&sol.gains.l, &riccati(&model, &cost), "L", 1e-10);
        assert_close(&sol.gains.k, &kalman(&model), "K", 1e-10);
    }
}
