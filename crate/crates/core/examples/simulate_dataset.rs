//! Simulates reaching trials with experimenter measurements of the hand
//! position and writes them as CSV, then reads the file back.

use sdnioc::config::{fingerprint, ModelConfig};
use sdnioc::io::{observed_path, read_trajectories, write_trajectories, Kind};
use sdnioc::simulate::rollout_batch;
use sdnioc::solver::{solve_gains, SolverOptions};
use sdnioc::zoo::{position_observer, reaching_model, ReachingParams};

fn main() -> sdnioc::Result<()> {
    let bundle = reaching_model(&ReachingParams::default());
    let exp = position_observer(1e-3);
    let sol = solve_gains(&bundle.model, &bundle.cost, SolverOptions::default())?;
    let mut data = rollout_batch(&bundle.model, &sol.gains, 100, 42, Some(&exp));
    data.model_fingerprint = fingerprint(&ModelConfig::from_bundle(&bundle).with_exp(exp))?;

    let dir = std::env::temp_dir().join("sdnioc-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("reaching.csv");
    write_trajectories(&path, &data, &Kind::ALL)?;
    write_trajectories(&observed_path(&path), &data, &[Kind::ExpObs])?;

    let back = read_trajectories(&path)?;
    assert_eq!(back, data);
    let endpoints: Vec<f64> = data.trials.iter().map(|t| t.states.last().unwrap()[0]).collect();
    let mean = endpoints.iter().sum::<f64>() / endpoints.len() as f64;
    let sd = (endpoints.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (endpoints.len() - 1) as f64).sqrt();
    println!("wrote {} and {}", path.display(), observed_path(&path).display());
    println!("endpoint {mean:.4} ± {sd:.4} m over {} trials", data.len());
    Ok(())
}
