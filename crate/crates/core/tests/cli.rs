use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn sdnioc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdnioc"))
        .args(args)
        .env_remove("SDNIOC_SEED")
        .env_remove("SDNIOC_THREADS")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = sdnioc(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn reaching_data(dir: &TempDir, trials: usize, partial: bool) -> (PathBuf, PathBuf) {
    let cfg = path(dir, "reach.json");
    let data = path(dir, "reach.csv");
    ok(&["problem", "reaching", "--out", s(&cfg)]);
    let n = trials.to_string();
    let mut args = vec!["simulate", s(&cfg), "--trials", &n, "--seed", "3", "--out", s(&data)];
    if partial {
        args.push("--partial-obs");
    }
    ok(&args);
    (cfg, data)
}

#[test]
fn random_problem_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (path(&dir, "a.json"), path(&dir, "b.json"));
    ok(&["problem", "random", "--seed", "7", "--out", s(&a)]);
    ok(&["problem", "random", "--seed", "7", "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = path(&dir, "c.json");
    ok(&["problem", "random", "--seed", "8", "--out", s(&c)]);
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn simulate_writes_every_kind_for_every_trial() {
    let dir = TempDir::new().unwrap();
    let (cfg, data) = reaching_data(&dir, 100, false);
    let text = std::fs::read_to_string(&data).unwrap();
    let horizon = sdnioc::config::load_model(&cfg).unwrap().model.horizon;
    let count = |kind: &str| {
        text.lines()
            .skip(1)
            .filter(|l| l.split(',').nth(2) == Some(kind))
            .count()
    };
    assert_eq!(count("state"), 100 * horizon);
    assert_eq!(count("estimate"), 100 * horizon);
    assert!(data.with_extension("meta.json").exists());
    assert!(Path::new(&format!("{}.manifest.json", data.display())).exists());
}

#[test]
fn partial_observation_writes_an_observed_file() {
    let dir = TempDir::new().unwrap();
    let (_, data) = reaching_data(&dir, 5, true);
    let observed = data.with_extension("observed.csv");
    let text = std::fs::read_to_string(&observed).unwrap();
    assert!(text.lines().count() > 1);
    assert!(text.lines().skip(1).all(|l| !l.contains(",state,")));
}

#[test]
fn bad_inputs_exit_with_status_two() {
    let dir = TempDir::new().unwrap();
    let (cfg, _) = reaching_data(&dir, 2, false);
    let empty = path(&dir, "empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = sdnioc(&["fit", s(&cfg), s(&empty), "--out", s(&path(&dir, "fit.json"))]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());

    let out = sdnioc(&["track", s(&cfg), s(&empty), "--out", s(&path(&dir, "t.csv"))]);
    assert_eq!(out.status.code(), Some(2));

    let missing = path(&dir, "missing.json");
    let out = sdnioc(&["simulate", s(&missing), "--out", s(&path(&dir, "x.csv"))]);
    assert_eq!(out.status.code(), Some(2));

    let out = sdnioc(&["problem", "random", "--r", "1", "--out", s(&path(&dir, "r.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn worker_count_does_not_change_outputs() {
    let dir = TempDir::new().unwrap();
    let (cfg, _) = reaching_data(&dir, 1, false);
    let mut files = Vec::new();
    for threads in ["1", "2"] {
        let data = path(&dir, &format!("d{threads}.csv"));
        let fit = path(&dir, &format!("f{threads}.json"));
        ok(&["--threads", threads, "simulate", s(&cfg), "--trials", "20", "--seed", "5", "--out", s(&data)]);
        ok(&[
            "--threads", threads, "fit", s(&cfg), s(&data), "--starts", "2", "--budget", "60", "--seed", "1",
            "--out", s(&fit),
        ]);
        files.push((std::fs::read(&data).unwrap(), std::fs::read(&fit).unwrap()));
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn fit_and_loglik_report_their_results() {
    let dir = TempDir::new().unwrap();
    let (cfg, data) = reaching_data(&dir, 10, false);
    let fit = path(&dir, "fit.json");
    let out = ok(&["fit", s(&cfg), s(&data), "--starts", "2", "--budget", "80", "--out", s(&fit)]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("fit.json"));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&fit).unwrap()).unwrap();
    for key in ["theta_mle", "loglik", "starts", "best_start_index", "spec", "seed", "n_trials"] {
        assert!(doc.get(key).is_some(), "missing {key}");
    }
    assert_eq!(doc["n_trials"], 10);
    assert_eq!(doc["starts"].as_array().unwrap().len(), 2);

    let ll = path(&dir, "ll.json");
    ok(&["loglik", s(&cfg), s(&data), "--out", s(&ll)]);
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&ll).unwrap()).unwrap();
    assert!(doc["loglik"].as_f64().unwrap().is_finite());
}

#[test]
fn track_writes_beliefs_for_partial_data() {
    let dir = TempDir::new().unwrap();
    let (cfg, data) = reaching_data(&dir, 3, true);
    let beliefs = path(&dir, "beliefs.csv");
    let observed = data.with_extension("observed.csv");
    ok(&["track", s(&cfg), s(&observed), "--params", "r=0.01", "--out", s(&beliefs)]);
    let text = std::fs::read_to_string(&beliefs).unwrap();
    assert_eq!(text.lines().next().unwrap(), "trial,t,component,mean,var");
    assert!(text.contains(",xhat0,"));
    assert!(text.contains(",x0,"));
}
