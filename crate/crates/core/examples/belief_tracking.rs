//! Tracks the agent's internal velocity estimate from noisy measurements of
//! the hand position alone, and writes the beliefs as CSV.

use sdnioc::io::write_beliefs;
use sdnioc::likelihood::{LikelihoodOptions, LikelihoodPlan};
use sdnioc::simulate::rollout_batch;
use sdnioc::solver::{solve_gains, SolverOptions};
use sdnioc::zoo::{position_observer, reaching, reaching_model, ReachingParams};

fn main() -> sdnioc::Result<()> {
    let bundle = reaching_model(&ReachingParams::default());
    let m = bundle.model.state_dim;
    let exp = position_observer(1e-3);
    let sol = solve_gains(&bundle.model, &bundle.cost, SolverOptions::default())?;
    let data = rollout_batch(&bundle.model, &sol.gains, 3, 11, Some(&exp));
    let plan = LikelihoodPlan::new(&bundle.model, &sol.gains, Some(&exp), LikelihoodOptions::default());

    let mut all = Vec::new();
    for tr in &data.trials {
        let (ll, beliefs) = plan.trajectory(tr)?;
        println!("trial log-likelihood {ll:.2}");
        all.push(beliefs);
    }
    let v = m + reaching::VELOCITY;
    println!("step  agent's estimate  tracked mean ± 2 SD");
    for (t, (b, e)) in all[0].iter().zip(&data.trials[0].estimates).enumerate().step_by(5) {
        println!(
            "{t:>4}  {:+.4}           {:+.4} ± {:.4}",
            e[reaching::VELOCITY],
            b.mean[v],
            2.0 * b.cov[(v, v)].sqrt()
        );
    }
    let labels: Vec<String> = (0..m).map(|i| format!("x{i}")).chain((0..m).map(|i| format!("xhat{i}"))).collect();
    let path = std::env::temp_dir().join("sdnioc-beliefs.csv");
    write_beliefs(&path, &all, &labels)?;
    println!("wrote {}", path.display());
    Ok(())
}
