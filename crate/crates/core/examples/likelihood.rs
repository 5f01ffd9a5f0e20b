//! Log-likelihood of simulated reaching data under the moment-matched
//! approximation and under the two plain-LQG baselines, at the true
//! parameters and at perturbed ones.

use sdnioc::estimator::{log_likelihood_at, FitProblem, LikelihoodKind};
use sdnioc::likelihood::LikelihoodOptions;
use sdnioc::simulate::rollout_batch;
use sdnioc::solver::{solve_gains, SolverOptions};
use sdnioc::zoo::{reaching_model, ReachingParams};

fn main() -> sdnioc::Result<()> {
    let bundle = reaching_model(&ReachingParams::default());
    let sol = solve_gains(&bundle.model, &bundle.cost, SolverOptions::default())?;
    let data = rollout_batch(&bundle.model, &sol.gains, 100, 1, None);
    let problem = FitProblem {
        spec: &bundle.spec,
        dataset: &data,
        base_model: &bundle.model,
        base_cost: &bundle.cost,
        exp: None,
    };
    let kinds = [
        LikelihoodKind::MomentMatched,
        LikelihoodKind::NoiseMatched,
        LikelihoodKind::PlainLqg,
    ];
    let t = &bundle.truth;
    let points = [
        ("truth", t.clone()),
        ("r x10", vec![t[0] * 10.0, t[1], t[2]]),
        ("v x10", vec![t[0], t[1] * 10.0, t[2]]),
        ("f / 10", vec![t[0], t[1], t[2] / 10.0]),
    ];
    println!("{:<8} {:>16} {:>16} {:>16}", "", "moment-matched", "noise-matched", "plain-lqg");
    for (label, theta) in &points {
        let lls: Vec<f64> = kinds
            .iter()
            .map(|&k| log_likelihood_at(&problem, theta, k, SolverOptions::default(), LikelihoodOptions::default()))
            .collect::<sdnioc::Result<_>>()?;
        println!("{label:<8} {:>16.2} {:>16.2} {:>16.2}", lls[0], lls[1], lls[2]);
    }
    Ok(())
}
