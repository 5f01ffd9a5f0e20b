//! Optimal controller and filter gains for the reaching task, and the mean
//! hand path they produce.

use sdnioc::simulate::rollout;
use sdnioc::solver::{solve_gains, SolverOptions};
use sdnioc::zoo::{reaching, reaching_model, ReachingParams};

fn main() -> sdnioc::Result<()> {
    let p = ReachingParams::default();
    let bundle = reaching_model(&p);
    let sol = solve_gains(&bundle.model, &bundle.cost, SolverOptions::default())?;
    println!(
        "converged: {} after {} iterations, expected cost {:.6e}",
        sol.converged, sol.iters_used, sol.expected_cost
    );
    for (i, c) in sol.cost_history.iter().enumerate() {
        println!("  iteration {i}: {c:.9e}");
    }

    // Same gains, noise switched off: the mean movement.
    let quiet = bundle.model.noiseless();
    let traj = rollout(&quiet, &sol.gains, 0);
    println!("t(s)  position(m)  velocity(m/s)");
    for (t, x) in traj.states.iter().enumerate().step_by(5) {
        println!(
            "{:.2}  {:+.4}      {:+.4}",
            t as f64 * p.dt,
            x[reaching::POSITION],
            x[reaching::VELOCITY]
        );
    }
    println!("L[0] = {:.3}", sol.gains.l[0]);
    Ok(())
}
