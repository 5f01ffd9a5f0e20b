//! Random control problems: joint recovery of the two control costs.

use sdnioc::bench::{per_param_median_abs_err, random_sweep};
use sdnioc::zoo::{random_problem_scaled, RandomProblemParams};

fn main() -> sdnioc::Result<()> {
    let p = RandomProblemParams { seed: 1, ..Default::default() };
    let b = random_problem_scaled(&p);
    println!("problem 1: m = {}, p = {}, true costs {:.3?}", b.model.state_dim, b.model.control_dim, b.truth);

    let rows = random_sweep(&RandomProblemParams::default(), 5, 100, 4, 100)?;
    for row in &rows {
        println!("{}: true {:.3?} fitted {:.3?}", row.label, row.truth, row.estimate);
    }
    println!("median |log error| per cost: {:.3?}", per_param_median_abs_err(&rows));
    Ok(())
}
