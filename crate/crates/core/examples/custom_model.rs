//! A model written as a JSON config: a damped point mass whose actuator
//! noise grows with the command, fitted for its effort weight.

use sdnioc::config::parse_model;
use sdnioc::estimator::{fit_mle, Binding, FitOptions, FitProblem, MatrixPath, ParamSpec};
use sdnioc::model::validate_model;
use sdnioc::simulate::rollout_batch;
use sdnioc::solver::{solve_gains, SolverOptions};

const CONFIG: &str = r#"{
  "m": 2, "p": 1, "k": 1, "T": 40,
  "A": [[1, 0.05], [0, 0.9]],
  "B": [[0], [0.05]],
  "H": [[1, 0]],
  "V": [[0.001, 0], [0, 0.01]],
  "C": [[[0], [0.02]]],
  "W": 0.01,
  "x1_mean": [1, 0],
  "x1_cov": [[0.01, 0], [0, 0.0001]],
  "Q": [[1, 0], [0, 0.1]],
  "R": 0.01
}"#;

fn main() -> sdnioc::Result<()> {
    let cfg = parse_model(CONFIG)?;
    validate_model(&cfg.model, &cfg.cost).into_result()?;
    let mut spec = ParamSpec::default();
    spec.push_log("r", 0.01, vec![Binding::entry(MatrixPath::R, 0, 0)]);

    let sol = solve_gains(&cfg.model, &cfg.cost, SolverOptions::default())?;
    let data = rollout_batch(&cfg.model, &sol.gains, 50, 9, None);
    let problem = FitProblem {
        spec: &spec,
        dataset: &data,
        base_model: &cfg.model,
        base_cost: &cfg.cost,
        exp: None,
    };
    let fit = fit_mle(&problem, &FitOptions { n_starts: 3, ..Default::default() })?;
    println!("{}", serde_json::to_string_pretty(&fit.to_json()).unwrap());
    Ok(())
}
