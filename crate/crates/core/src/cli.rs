//! The `sdnioc` command-line tool.
//!
//! Every command writes its outputs plus `<out>.manifest.json` and prints
//! only the output paths on stdout. Exit status is 0 on success, 2 for
//! usage and input errors and 1 for numerical failures.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::bench;
use crate::config::{fingerprint, load_model, save_model, ModelConfig};
use crate::error::{Error, Result};
use crate::estimator::{apply_params, fit_mle, FitOptions, FitProblem, LikelihoodKind, ParamSpec};
use crate::io::{observed_path, read_trajectories, write_belief_covariances, write_beliefs, write_trajectories, Kind};
use crate::likelihood::{noise_matched_model, ExactLqgPlan, LikelihoodOptions, LikelihoodPlan};
use crate::model::{validate_experimenter, validate_model, ExperimenterObservationModel, GainSchedule};
use crate::simulate::{rollout_batch, TrajectoryDataset};
use crate::solver::{solve_gains, SolverOptions};
use crate::zoo::{
    position_observer, random_problem_scaled, reaching_model, saccade, saccade_model, RandomProblemParams,
    ReachingParams, SaccadeParams,
};

#[derive(Debug, Parser)]
#[command(name = "sdnioc", version, about = "Inverse optimal control with signal-dependent noise")]
pub struct Cli {
    /// Worker threads; defaults to all available cores.
    #[arg(long, global = true, env = "SDNIOC_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the model config of a benchmark problem.
    Problem(ProblemArgs),
    /// Simulate trials from a model config.
    Simulate(SimulateArgs),
    /// Evaluate the log-likelihood of a dataset.
    Loglik(LoglikArgs),
    /// Maximum-likelihood fit of the config's parameters to a dataset.
    Fit(FitArgs),
    /// Track the experimenter's belief about the agent's estimates.
    Track(TrackArgs),
    /// Run a benchmark and write a metrics report.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ProblemKind {
    Reaching,
    Saccade,
    Random,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    pub kind: ProblemKind,
    /// Control effort weight (reaching, saccade).
    #[arg(long)]
    pub r: Option<f64>,
    /// Terminal velocity weight (reaching).
    #[arg(long)]
    pub v: Option<f64>,
    /// Terminal force weight (reaching).
    #[arg(long)]
    pub f: Option<f64>,
    /// Noise SD of the experimenter's measurement of position (reaching, saccade).
    #[arg(long)]
    pub exp_noise: Option<f64>,
    /// Number of timesteps (random).
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Problem seed (random).
    #[arg(long, env = "SDNIOC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub config: PathBuf,
    /// Parameter values as `name=value,…`; defaults to the config as stored.
    #[arg(long)]
    pub params: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, env = "SDNIOC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Also sample experimenter measurements and write `<stem>.observed.csv`
    /// holding only those.
    #[arg(long)]
    pub partial_obs: bool,
    /// Set every noise source and the initial uncertainty to zero.
    #[arg(long)]
    pub zero_noise: bool,
    /// Write the controller and filter gains as JSON.
    #[arg(long)]
    pub dump_gains: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Baseline {
    PlainLqg,
    NoiseMatched,
}

impl Baseline {
    fn kind(b: Option<Baseline>) -> LikelihoodKind {
        match b {
            None => LikelihoodKind::MomentMatched,
            Some(Baseline::PlainLqg) => LikelihoodKind::PlainLqg,
            Some(Baseline::NoiseMatched) => LikelihoodKind::NoiseMatched,
        }
    }
}

#[derive(Debug, Args)]
pub struct DataArgs {
    pub config: PathBuf,
    /// Trajectory CSV.
    pub data: PathBuf,
    /// Use the experimenter measurements even when states are present.
    #[arg(long)]
    pub partial_obs: bool,
    /// Drop the density of the first measurement from the likelihood.
    #[arg(long)]
    pub omit_initial: bool,
}

#[derive(Debug, Args)]
pub struct LoglikArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long)]
    pub params: Option<String>,
    /// Use a baseline likelihood instead of the moment-matched one.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Parameter spec JSON; defaults to the config's `param_spec`.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub starts: usize,
    #[arg(long, env = "SDNIOC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Fit a baseline likelihood instead of the moment-matched one.
    #[arg(long, value_enum)]
    pub baseline: Option<Baseline>,
    /// Final trust-region radius of the optimizer.
    #[arg(long, default_value_t = 1e-6)]
    pub rho_end: f64,
    /// Objective evaluations per start.
    #[arg(long, default_value_t = 1000)]
    pub budget: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TrackArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Parameter values as `name=value,…`.
    #[arg(long)]
    pub params: String,
    /// Also write full belief covariances as JSON.
    #[arg(long)]
    pub full_cov: Option<PathBuf>,
    #[arg(long)]
    pub dump_gains: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchKind {
    /// Joint recovery of the two control costs on random problems.
    Random,
    /// Reaching recovery RMSE over pairwise parameter grids.
    ReachingGrid,
    /// Fidelity of the moment-matched trajectory distribution.
    MomentMatching,
    /// Reaching recovery with the full method and the plain-LQG baseline.
    Recovery,
    /// Reaching recovery error against the number of trials.
    Convergence,
    /// Saccade effort-weight recovery.
    Saccade,
    /// Belief tracking from position-only measurements.
    Tracking,
    /// Wall-clock time of one reaching likelihood evaluation.
    Timing,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LogBase {
    E,
    #[value(name = "10")]
    Ten,
}

impl LogBase {
    fn rescale(self, rows: &[bench::RecoveryRow]) -> Vec<bench::RecoveryRow> {
        let k = match self {
            LogBase::E => 1.0,
            LogBase::Ten => std::f64::consts::LN_10,
        };
        rows.iter()
            .map(|r| bench::RecoveryRow {
                log_err: r.log_err.iter().map(|e| e / k).collect(),
                ..r.clone()
            })
            .collect()
    }

    fn name(self) -> &'static str {
        match self {
            LogBase::E => "e",
            LogBase::Ten => "10",
        }
    }
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub kind: BenchKind,
    /// Number of problems (random) or of parameter values (saccade).
    #[arg(long)]
    pub count: Option<usize>,
    /// Repetitions per setting.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Trials per dataset.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub starts: usize,
    /// Grid points per axis (reaching-grid).
    #[arg(long, default_value_t = 3)]
    pub grid: usize,
    /// Logarithm base of reported parameter errors.
    #[arg(long, value_enum, default_value_t = LogBase::E)]
    pub log_base: LogBase,
    #[arg(long, env = "SDNIOC_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_paths: Vec<String>,
    pub seed: u64,
    pub timestamp: String,
    pub tool_version: String,
    pub output_paths: Vec<String>,
}

fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn display(p: &Path) -> String {
    p.display().to_string()
}

/// Parses `name=value,…` against a spec, starting from `defaults`.
pub fn parse_params(text: &str, spec: &ParamSpec, defaults: Option<&[f64]>) -> Result<Vec<f64>> {
    let mut theta: Vec<Option<f64>> = match defaults {
        Some(d) => d.iter().copied().map(Some).collect(),
        None => vec![None; spec.len()],
    };
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("`{item}` is not of the form name=value")))?;
        let idx = spec
            .names
            .iter()
            .position(|n| n == name.trim())
            .ok_or_else(|| Error::InvalidInput(format!("unknown parameter `{}`; known: {:?}", name.trim(), spec.names)))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::InvalidInput(format!("`{value}` is not a number")))?;
        theta[idx] = Some(v);
    }
    theta
        .into_iter()
        .zip(&spec.names)
        .map(|(v, n)| v.ok_or_else(|| Error::InvalidInput(format!("no value for parameter `{n}`"))))
        .collect()
}

/// Config with `--params` applied; without them the config as stored.
fn configured(path: &Path, params: Option<&str>) -> Result<ModelConfig> {
    let mut cfg = load_model(path)?;
    validate_model(&cfg.model, &cfg.cost).into_result()?;
    if let Some(exp) = &cfg.exp {
        validate_experimenter(exp, cfg.model.state_dim).into_result()?;
    }
    if let Some(text) = params {
        let spec = cfg
            .spec
            .as_ref()
            .ok_or_else(|| Error::schema("param_spec", "--params needs a config with `param_spec`"))?;
        let theta = parse_params(text, spec, cfg.theta.as_deref())?;
        let (model, cost) = apply_params(spec, &theta, &cfg.model, &cfg.cost)?;
        cfg.model = model;
        cfg.cost = cost;
        cfg.theta = Some(theta);
    }
    Ok(cfg)
}

fn write_gains(path: &Path, gains: &GainSchedule) -> Result<()> {
    let mats = |ms: &[nalgebra::DMatrix<f64>]| -> Vec<Vec<Vec<f64>>> {
        ms.iter()
            .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect()
    };
    let doc = json!({ "L": mats(&gains.l), "K": mats(&gains.k) });
    std::fs::write(path, serde_json::to_string(&doc)? + "\n")?;
    Ok(())
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// Loads a dataset and decides which measurements the likelihood uses.
fn load_data<'a>(
    args: &DataArgs,
    cfg: &'a ModelConfig,
) -> Result<(TrajectoryDataset, Option<&'a ExperimenterObservationModel>)> {
    let data = read_trajectories(&args.data)?;
    let has_states = data.trials.iter().all(|t| !t.states.is_empty());
    let has_obs = data.trials.iter().all(|t| t.exp_obs.is_some());
    let partial = args.partial_obs || !has_states;
    if partial {
        if !has_obs {
            return Err(Error::InvalidInput(format!(
                "{} lacks states or experimenter measurements for some trials",
                display(&args.data)
            )));
        }
        let exp = cfg
            .exp
            .as_ref()
            .ok_or_else(|| Error::schema("M", "partially observed data needs an experimenter model"))?;
        Ok((data, Some(exp)))
    } else {
        Ok((data, None))
    }
}

fn lik_opts(args: &DataArgs) -> LikelihoodOptions {
    LikelihoodOptions {
        include_initial: !args.omit_initial,
    }
}

struct Outcome {
    config_paths: Vec<PathBuf>,
    seed: u64,
    outputs: Vec<PathBuf>,
}

fn cmd_problem(a: &ProblemArgs) -> Result<Outcome> {
    let reject = |flag: &str, set: bool| {
        if set {
            Err(Error::InvalidInput(format!("--{flag} does not apply to {:?} problems", a.kind)))
        } else {
            Ok(())
        }
    };
    let cfg = match a.kind {
        ProblemKind::Reaching => {
            reject("horizon", a.horizon.is_some())?;
            let d = ReachingParams::default();
            let p = ReachingParams {
                r: a.r.unwrap_or(d.r),
                v: a.v.unwrap_or(d.v),
                f: a.f.unwrap_or(d.f),
                ..d
            };
            ModelConfig::from_bundle(&reaching_model(&p)).with_exp(position_observer(a.exp_noise.unwrap_or(1e-3)))
        }
        ProblemKind::Saccade => {
            reject("v", a.v.is_some())?;
            reject("f", a.f.is_some())?;
            reject("horizon", a.horizon.is_some())?;
            let p = SaccadeParams {
                r: a.r.unwrap_or(SaccadeParams::default().r),
                ..Default::default()
            };
            let exp = ExperimenterObservationModel::select(4, &[saccade::ANGLE], a.exp_noise.unwrap_or(0.1));
            ModelConfig::from_bundle(&saccade_model(&p)).with_exp(exp)
        }
        ProblemKind::Random => {
            for (flag, set) in [("r", a.r.is_some()), ("v", a.v.is_some()), ("f", a.f.is_some()), ("exp-noise", a.exp_noise.is_some())] {
                reject(flag, set)?;
            }
            let d = RandomProblemParams::default();
            let p = RandomProblemParams {
                seed: a.seed,
                horizon: a.horizon.unwrap_or(d.horizon),
                ..d
            };
            if p.horizon < 2 {
                return Err(Error::InvalidInput("--horizon must be at least 2".into()));
            }
            ModelConfig::from_bundle(&random_problem_scaled(&p))
        }
    };
    validate_model(&cfg.model, &cfg.cost).into_result()?;
    save_model(&a.out, &cfg)?;
    Ok(Outcome {
        config_paths: vec![],
        seed: a.seed,
        outputs: vec![a.out.clone()],
    })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Outcome> {
    if a.trials == 0 {
        return Err(Error::InvalidInput("--trials must be at least 1".into()));
    }
    let mut cfg = configured(&a.config, a.params.as_deref())?;
    if a.zero_noise {
        cfg.model = cfg.model.noiseless();
        if let Some(exp) = cfg.exp.as_mut() {
            exp.noise_scale *= 0.0;
        }
    }
    let exp = if a.partial_obs {
        Some(cfg.exp.as_ref().ok_or_else(|| Error::schema("M", "--partial-obs needs an experimenter model"))?)
    } else {
        None
    };
    let sol = solve_gains(&cfg.model, &cfg.cost, SolverOptions::default())?;
    if !sol.converged {
        log::warn!("gain iteration stopped after {} iterations without converging", sol.iters_used);
    }
    let mut data = rollout_batch(&cfg.model, &sol.gains, a.trials, a.seed, exp);
    data.model_fingerprint = fingerprint(&cfg)?;
    let mut outputs = vec![a.out.clone()];
    write_trajectories(&a.out, &data, &Kind::ALL)?;
    if a.partial_obs {
        let observed = observed_path(&a.out);
        write_trajectories(&observed, &data, &[Kind::ExpObs])?;
        outputs.push(observed);
    }
    if let Some(path) = &a.dump_gains {
        write_gains(path, &sol.gains)?;
        outputs.push(path.clone());
    }
    Ok(Outcome {
        config_paths: vec![a.config.clone()],
        seed: a.seed,
        outputs,
    })
}

fn cmd_loglik(a: &LoglikArgs) -> Result<Outcome> {
    let cfg = configured(&a.data.config, a.params.as_deref())?;
    let (data, exp) = load_data(&a.data, &cfg)?;
    let lik = lik_opts(&a.data);
    let kind = Baseline::kind(a.baseline);
    let ll = match kind {
        LikelihoodKind::MomentMatched => {
            let sol = solve_gains(&cfg.model, &cfg.cost, SolverOptions::default())?;
            LikelihoodPlan::new(&cfg.model, &sol.gains, exp, lik).dataset(&data)?
        }
        LikelihoodKind::PlainLqg => {
            let plain = cfg.model.without_signal_noise();
            let sol = solve_gains(&plain, &cfg.cost, SolverOptions::default())?;
            ExactLqgPlan::new(&plain, &sol.gains, exp, lik)?.dataset(&data)?
        }
        LikelihoodKind::NoiseMatched => {
            let sol = solve_gains(&cfg.model, &cfg.cost, SolverOptions::default())?;
            let plain = noise_matched_model(&cfg.model, &sol.gains);
            let sol = solve_gains(&plain, &cfg.cost, SolverOptions::default())?;
            ExactLqgPlan::new(&plain, &sol.gains, exp, lik)?.dataset(&data)?
        }
    };
    write_json(&a.out, &json!({ "loglik": ll, "n_trials": data.len(), "likelihood": kind }))?;
    Ok(Outcome {
        config_paths: vec![a.data.config.clone(), a.data.data.clone()],
        seed: 0,
        outputs: vec![a.out.clone()],
    })
}

fn cmd_fit(a: &FitArgs) -> Result<Outcome> {
    let cfg = configured(&a.data.config, None)?;
    let spec: ParamSpec = match &a.spec {
        Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
        None => cfg
            .spec
            .clone()
            .ok_or_else(|| Error::schema("param_spec", "config has no parameter spec; pass --spec"))?,
    };
    let (data, exp) = load_data(&a.data, &cfg)?;
    let problem = FitProblem {
        spec: &spec,
        dataset: &data,
        base_model: &cfg.model,
        base_cost: &cfg.cost,
        exp,
    };
    let mut opts = FitOptions {
        n_starts: a.starts,
        seed: a.seed,
        kind: Baseline::kind(a.baseline),
        likelihood: lik_opts(&a.data),
        ..Default::default()
    };
    opts.dfo.rho_end = a.rho_end;
    opts.dfo.budget = a.budget;
    let fit = fit_mle(&problem, &opts)?;
    let mut doc = fit.to_json();
    doc["n_trials"] = json!(data.len());
    doc["partial_obs"] = json!(exp.is_some());
    write_json(&a.out, &doc)?;
    let mut config_paths = vec![a.data.config.clone(), a.data.data.clone()];
    config_paths.extend(a.spec.clone());
    Ok(Outcome {
        config_paths,
        seed: a.seed,
        outputs: vec![a.out.clone()],
    })
}

fn cmd_track(a: &TrackArgs) -> Result<Outcome> {
    let cfg = configured(&a.data.config, Some(&a.params))?;
    let (data, exp) = load_data(&a.data, &cfg)?;
    let sol = solve_gains(&cfg.model, &cfg.cost, SolverOptions::default())?;
    let plan = LikelihoodPlan::new(&cfg.model, &sol.gains, exp, lik_opts(&a.data));
    let beliefs = data
        .trials
        .iter()
        .enumerate()
        .map(|(i, tr)| {
            plan.trajectory(tr).map(|(_, b)| b).map_err(|e| Error::Trial {
                trial: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let m = cfg.model.state_dim;
    let mut labels: Vec<String> = Vec::new();
    if exp.is_some() {
        labels.extend((0..m).map(|i| format!("x{i}")));
    }
    labels.extend((0..m).map(|i| format!("xhat{i}")));
    write_beliefs(&a.out, &beliefs, &labels)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(path) = &a.full_cov {
        write_belief_covariances(path, &beliefs, &labels)?;
        outputs.push(path.clone());
    }
    if let Some(path) = &a.dump_gains {
        write_gains(path, &sol.gains)?;
        outputs.push(path.clone());
    }
    Ok(Outcome {
        config_paths: vec![a.data.config.clone(), a.data.data.clone()],
        seed: 0,
        outputs,
    })
}

fn recovery_table(rows: &[bench::RecoveryRow], base: LogBase) -> serde_json::Value {
    let rows = base.rescale(rows);
    json!({
        "log_base": base.name(),
        "rows": rows,
        "per_param_rmse": bench::per_param_rmse(&rows),
        "per_param_median_abs_err": bench::per_param_median_abs_err(&rows),
    })
}

fn cmd_bench(a: &BenchArgs) -> Result<Outcome> {
    let reaching = ReachingParams::default();
    let doc = match a.kind {
        BenchKind::Random => {
            let count = a.count.unwrap_or(50);
            let rows = bench::random_sweep(&RandomProblemParams::default(), count, a.trials.unwrap_or(100), a.starts, a.seed)?;
            let within = rows.iter().filter(|r| r.log_err.iter().all(|e| e.abs() <= 0.3)).count();
            let mut doc = recovery_table(&rows, a.log_base);
            doc["fraction_within_0.3"] = json!(within as f64 / count.max(1) as f64);
            doc
        }
        BenchKind::ReachingGrid => {
            let cells = bench::reaching_grid(a.grid, a.trials.unwrap_or(100), a.reps.unwrap_or(3), a.starts, a.seed)?;
            json!({ "cells": cells, "names": ["r", "v", "f"] })
        }
        BenchKind::MomentMatching => {
            serde_json::to_value(bench::moment_matching(&reaching, a.trials.unwrap_or(10_000), a.seed)?)?
        }
        BenchKind::Recovery => {
            let data = bench::reaching_datasets(&reaching, a.trials.unwrap_or(100), a.reps.unwrap_or(3), a.seed)?;
            let full = bench::reaching_recovery(&reaching, &data, LikelihoodKind::MomentMatched, a.starts, a.seed)?;
            let plain = bench::reaching_recovery(&reaching, &data, LikelihoodKind::PlainLqg, a.starts, a.seed)?;
            json!({ "names": ["r", "v", "f"], "moment_matched": recovery_table(&full, a.log_base), "plain_lqg": recovery_table(&plain, a.log_base) })
        }
        BenchKind::Convergence => {
            let ns = [1, 3, 10, 32, a.trials.unwrap_or(100)];
            serde_json::to_value(bench::sample_size_convergence(&reaching, &ns, a.reps.unwrap_or(3), a.starts, a.seed)?)?
        }
        BenchKind::Saccade => {
            let values = bench::log_space(1e-6, 1e-4, a.count.unwrap_or(10));
            let rows = bench::saccade_recovery(&values, a.reps.unwrap_or(10), a.trials.unwrap_or(20), a.starts, a.seed)?;
            recovery_table(&rows, a.log_base)
        }
        BenchKind::Tracking => serde_json::to_value(bench::belief_tracking(&reaching, 1e-3, a.trials.unwrap_or(20), a.seed)?)?,
        BenchKind::Timing => serde_json::to_value(bench::likelihood_timing(&reaching, a.trials.unwrap_or(100), a.reps.unwrap_or(5), a.seed)?)?,
    };
    write_json(&a.out, &doc)?;
    Ok(Outcome {
        config_paths: vec![],
        seed: a.seed,
        outputs: vec![a.out.clone()],
    })
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Problem(a) => cmd_problem(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Loglik(a) => cmd_loglik(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Track(a) => cmd_track(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn primary_output(cli: &Cli) -> &Path {
    match &cli.command {
        Command::Problem(a) => &a.out,
        Command::Simulate(a) => &a.out,
        Command::Loglik(a) => &a.out,
        Command::Fit(a) => &a.out,
        Command::Track(a) => &a.out,
        Command::Bench(a) => &a.out,
    }
}

/// Runs a parsed command and writes its manifest; returns the paths written.
pub fn run(cli: &Cli, argv: &[String]) -> Result<Vec<PathBuf>> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker threads: {e}")))?;
    let outcome = pool.install(|| dispatch(cli))?;
    let manifest = RunManifest {
        command: argv.join(" "),
        config_paths: outcome.config_paths.iter().map(|p| display(p)).collect(),
        seed: outcome.seed,
        timestamp: chrono::Utc::now().to_rfc3339(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        output_paths: outcome.outputs.iter().map(|p| display(p)).collect(),
    };
    let mpath = manifest_path(primary_output(cli));
    std::fs::write(&mpath, serde_json::to_string_pretty(&manifest)? + "\n")?;
    let mut written = outcome.outputs;
    written.push(mpath);
    Ok(written)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match run(&cli, &argv) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    }
}
