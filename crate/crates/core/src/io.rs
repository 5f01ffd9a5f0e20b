//! CSV files for trajectory datasets and tracked beliefs.
//!
//! A trajectory file has the header `trial,t,kind,c0,…` with one row per
//! trial, kind and step; columns beyond a kind's dimension stay empty. The
//! sidecar `<stem>.meta.json` records the model fingerprint and the seed.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::GaussianBelief;
use crate::simulate::{derive_trial_seed, Trajectory, TrajectoryDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    State,
    Estimate,
    Control,
    AgentObs,
    ExpObs,
}

impl Kind {
    pub const ALL: [Kind; 5] = [
        Kind::State,
        Kind::Estimate,
        Kind::Control,
        Kind::AgentObs,
        Kind::ExpObs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::State => "state",
            Kind::Estimate => "estimate",
            Kind::Control => "control",
            Kind::AgentObs => "agent_obs",
            Kind::ExpObs => "exp_obs",
        }
    }

    fn parse(s: &str) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| k.as_str() == s)
    }

    fn of(self, tr: &Trajectory) -> &[DVector<f64>] {
        match self {
            Kind::State => &tr.states,
            Kind::Estimate => &tr.estimates,
            Kind::Control => &tr.controls,
            Kind::AgentObs => &tr.agent_obs,
            Kind::ExpObs => tr.exp_obs.as_deref().unwrap_or(&[]),
        }
    }
}

/// Contents of the sidecar file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub model_fingerprint: String,
    pub seed: u64,
    pub n_trials: usize,
    pub kinds: Vec<Kind>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

/// `<stem>.observed.csv` next to `csv_path`.
pub fn observed_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("observed.csv")
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.position() {
        Some(pos) => Error::Parse {
            line: pos.line() as usize,
            column: 0,
            msg: e.to_string(),
        },
        None => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::InvalidInput(format!("{other:?}")),
        },
    }
}

/// Writes the given kinds of every trial, plus the sidecar.
pub fn write_trajectories(path: &Path, data: &TrajectoryDataset, kinds: &[Kind]) -> Result<()> {
    let width = data
        .trials
        .iter()
        .flat_map(|tr| kinds.iter().flat_map(|k| k.of(tr).first().map(|v| v.len())))
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["trial".to_string(), "t".into(), "kind".into()];
    header.extend((0..width).map(|i| format!("c{i}")));
    w.write_record(&header).map_err(csv_err)?;
    let mut row: Vec<String> = Vec::with_capacity(width + 3);
    for (i, tr) in data.trials.iter().enumerate() {
        for &kind in kinds {
            for (t, v) in kind.of(tr).iter().enumerate() {
                row.clear();
                row.push(i.to_string());
                row.push(t.to_string());
                row.push(kind.as_str().into());
                row.extend(v.iter().map(|&x| fmt_f64(x)));
                row.resize(width + 3, String::new());
                w.write_record(&row).map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    let present: Vec<Kind> = kinds
        .iter()
        .copied()
        .filter(|k| data.trials.iter().any(|tr| !k.of(tr).is_empty()))
        .collect();
    let meta = DatasetMeta {
        model_fingerprint: data.model_fingerprint.clone(),
        seed: data.seed,
        n_trials: data.len(),
        kinds: present,
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(())
}

/// Reads a trajectory file; the sidecar is used when present.
///
/// Trials may carry any subset of kinds, but each kind must cover
/// consecutive steps from 0 with a fixed dimension.
pub fn read_trajectories(path: &Path) -> Result<TrajectoryDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(csv_err)?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    if headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::InvalidInput(format!("{} is empty", path.display())));
    }
    let prefix: Vec<&str> = headers.iter().take(3).collect();
    if prefix != ["trial", "t", "kind"] {
        return Err(Error::Parse {
            line: 1,
            column: 0,
            msg: "header must start with `trial,t,kind`".into(),
        });
    }
    let mut trials: BTreeMap<usize, BTreeMap<Kind, Vec<DVector<f64>>>> = BTreeMap::new();
    for (row_idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = row_idx + 2;
        let bad = |column: usize, msg: String| Error::Parse { line, column, msg };
        let field = |i: usize| rec.get(i).unwrap_or("").trim();
        let trial: usize = field(0)
            .parse()
            .map_err(|_| bad(1, format!("bad trial index `{}`", field(0))))?;
        let t: usize = field(1)
            .parse()
            .map_err(|_| bad(2, format!("bad step `{}`", field(1))))?;
        let kind = Kind::parse(field(2)).ok_or_else(|| bad(3, format!("unknown kind `{}`", field(2))))?;
        let mut vals = Vec::new();
        for i in 3..rec.len() {
            let s = field(i);
            if s.is_empty() {
                if rec.iter().skip(i).any(|x| !x.trim().is_empty()) {
                    return Err(bad(i + 1, "gap between values".into()));
                }
                break;
            }
            let x: f64 = s.parse().map_err(|_| bad(i + 1, format!("bad number `{s}`")))?;
            vals.push(x);
        }
        let series = trials.entry(trial).or_default().entry(kind).or_default();
        if t != series.len() {
            return Err(bad(2, format!("trial {trial} {}: expected step {}, found {t}", kind.as_str(), series.len())));
        }
        if series.first().is_some_and(|v| v.len() != vals.len()) {
            return Err(bad(4, format!("trial {trial} {}: dimension changes at step {t}", kind.as_str())));
        }
        series.push(DVector::from_vec(vals));
    }
    if trials.is_empty() {
        return Err(Error::InvalidInput(format!("{} holds no trials", path.display())));
    }
    if let Some((pos, (&id, _))) = trials.iter().enumerate().find(|(i, (&id, _))| *i != id) {
        return Err(Error::InvalidInput(format!(
            "trial indices must run 0..n, found {id} at position {pos}"
        )));
    }
    let meta: Option<DatasetMeta> = match std::fs::read_to_string(sidecar_path(path)) {
        Ok(text) => Some(serde_json::from_str(&text)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(e.into()),
    };
    let seed = meta.as_ref().map_or(0, |m| m.seed);
    let trials = trials
        .into_iter()
        .map(|(i, mut kinds)| {
            let mut take = |k: Kind| kinds.remove(&k).unwrap_or_default();
            Trajectory {
                states: take(Kind::State),
                estimates: take(Kind::Estimate),
                controls: take(Kind::Control),
                agent_obs: take(Kind::AgentObs),
                exp_obs: kinds.remove(&Kind::ExpObs),
                seed: if meta.is_some() { derive_trial_seed(seed, i as u64) } else { 0 },
            }
        })
        .collect();
    Ok(TrajectoryDataset {
        trials,
        model_fingerprint: meta.map(|m| m.model_fingerprint).unwrap_or_default(),
        seed,
    })
}

/// Writes `trial,t,component,mean,var` rows; `labels` names each belief
/// component.
pub fn write_beliefs(path: &Path, beliefs: &[Vec<GaussianBelief>], labels: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["trial", "t", "component", "mean", "var"]).map_err(csv_err)?;
    for (trial, per_step) in beliefs.iter().enumerate() {
        for (t, b) in per_step.iter().enumerate() {
            if b.dim() != labels.len() {
                return Err(Error::Shape(format!(
                    "belief of dimension {} with {} labels",
                    b.dim(),
                    labels.len()
                )));
            }
            for (c, label) in labels.iter().enumerate() {
                w.write_record([
                    trial.to_string(),
                    t.to_string(),
                    label.clone(),
                    fmt_f64(b.mean[c]),
                    fmt_f64(b.cov[(c, c)]),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Full belief covariances as JSON: `trials[i][t] = {mean, cov}`.
pub fn write_belief_covariances(path: &Path, beliefs: &[Vec<GaussianBelief>], labels: &[String]) -> Result<()> {
    let trials: Vec<Vec<serde_json::Value>> = beliefs
        .iter()
        .map(|steps| {
            steps
                .iter()
                .map(|b| {
                    let cov: Vec<Vec<f64>> = b.cov.row_iter().map(|r| r.iter().copied().collect()).collect();
                    serde_json::json!({ "mean": b.mean.as_slice(), "cov": cov })
                })
                .collect()
        })
        .collect();
    let doc = serde_json::json!({ "components": labels, "trials": trials });
    std::fs::write(path, serde_json::to_string(&doc)? + "\n")?;
    Ok(())
}
