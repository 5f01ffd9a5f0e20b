//! Saccade model: the eye trajectory at a few effort weights, and recovery
//! of the weight from 20 trials.

use sdnioc::bench::{log_space, saccade_recovery};
use sdnioc::simulate::rollout;
use sdnioc::solver::{solve_gains, SolverOptions};
use sdnioc::zoo::{saccade, saccade_model, SaccadeParams};

fn main() -> sdnioc::Result<()> {
    for r in [1e-6, 1e-4, 1e-2] {
        let b = saccade_model(&SaccadeParams { r, ..Default::default() });
        let sol = solve_gains(&b.model, &b.cost, SolverOptions::default())?;
        let traj = rollout(&b.model.noiseless(), &sol.gains, 0);
        let peak = traj.states.iter().map(|x| x[saccade::VELOCITY].abs()).fold(0.0, f64::max);
        let end = traj.states.last().unwrap()[saccade::ANGLE];
        println!("r = {r:.0e}: final angle {end:+.2} deg, peak velocity {peak:.0} deg/s");
    }
    let rows = saccade_recovery(&log_space(1e-6, 1e-4, 3), 2, 20, 3, 5)?;
    for row in &rows {
        println!("{}: estimate {:.3e} (log error {:+.3})", row.label, row.estimate[0], row.log_err[0]);
    }
    Ok(())
}
