//! Recovers the effort and terminal-cost weights of the reaching task from
//! 100 simulated trials, with the moment-matched likelihood and with the
//! plain-LQG baseline.

use sdnioc::estimator::{fit_mle, FitOptions, FitProblem, LikelihoodKind};
use sdnioc::metrics::per_param_log_err;
use sdnioc::simulate::rollout_batch;
use sdnioc::solver::{solve_gains, SolverOptions};
use sdnioc::zoo::{reaching_model, ReachingParams};

fn main() -> sdnioc::Result<()> {
    let bundle = reaching_model(&ReachingParams::default());
    let sol = solve_gains(&bundle.model, &bundle.cost, SolverOptions::default())?;
    let data = rollout_batch(&bundle.model, &sol.gains, 100, 7, None);
    let problem = FitProblem {
        spec: &bundle.spec,
        dataset: &data,
        base_model: &bundle.model,
        base_cost: &bundle.cost,
        exp: None,
    };
    for kind in [LikelihoodKind::MomentMatched, LikelihoodKind::PlainLqg] {
        let opts = FitOptions {
            n_starts: 5,
            seed: 3,
            kind,
            ..Default::default()
        };
        let fit = fit_mle(&problem, &opts)?;
        let err = per_param_log_err(&bundle.truth, &fit.theta_mle)?;
        println!("{kind:?}: loglik {:.2}, best of {} starts = #{}", fit.loglik, fit.starts.len(), fit.best_start_index);
        for ((name, est), (truth, e)) in fit.names.iter().zip(&fit.theta_mle).zip(bundle.truth.iter().zip(&err)) {
            println!("  {name}: {est:.4e} (true {truth:.1e}, log error {e:+.3})");
        }
    }
    Ok(())
}
