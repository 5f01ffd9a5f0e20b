//! JSON model configuration files.
//!
//! Matrices are row-major nested arrays. A field that may vary over time
//! holds either one matrix, broadcast to every step, or an array of `T`
//! matrices. Plain numbers are promoted to 1×1 matrices and flat arrays to
//! column (or, where one row is expected, row) matrices.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::estimator::ParamSpec;
use crate::model::{CostModel, ExperimenterObservationModel, SystemModel};
use crate::zoo::ProblemBundle;

const KNOWN_FIELDS: &[&str] = &[
    "m", "p", "k", "T", "A", "B", "H", "V", "C", "W", "D", "E", "x1_mean", "x1_cov",
    "xhat1_mean", "xhat1_cov", "Q", "R", "M", "N", "param_spec", "theta",
];

/// Everything a config file can hold.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub model: SystemModel,
    pub cost: CostModel,
    pub exp: Option<ExperimenterObservationModel>,
    pub spec: Option<ParamSpec>,
    /// Natural-space parameter values the config was built with, in `spec` order.
    pub theta: Option<Vec<f64>>,
}

impl ModelConfig {
    pub fn new(model: SystemModel, cost: CostModel) -> Self {
        ModelConfig {
            model,
            cost,
            exp: None,
            spec: None,
            theta: None,
        }
    }

    pub fn from_bundle(bundle: &ProblemBundle) -> Self {
        ModelConfig {
            model: bundle.model.clone(),
            cost: bundle.cost.clone(),
            exp: None,
            spec: Some(bundle.spec.clone()),
            theta: Some(bundle.truth.clone()),
        }
    }

    pub fn with_exp(mut self, exp: ExperimenterObservationModel) -> Self {
        self.exp = Some(exp);
        self
    }
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelConfig> {
    parse_model(&std::fs::read_to_string(path)?)
}

pub fn save_model(path: impl AsRef<Path>, config: &ModelConfig) -> Result<()> {
    std::fs::write(path, to_json_string(config)?)?;
    Ok(())
}

/// SHA-256 of the canonical serialization, as lowercase hex.
pub fn fingerprint(config: &ModelConfig) -> Result<String> {
    Ok(hex_digest(to_json_string(config)?.as_bytes()))
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn depth(v: &Value) -> usize {
    match v {
        Value::Array(items) => 1 + items.first().map_or(0, depth),
        _ => 0,
    }
}

fn number(v: &Value, field: &str) -> Result<f64> {
    v.as_f64()
        .ok_or_else(|| Error::schema(field, format!("expected a number, got {v}")))
}

fn parse_matrix(
    v: &Value,
    field: &str,
    rows: Option<usize>,
    cols: Option<usize>,
) -> Result<DMatrix<f64>> {
    let mat = match v {
        Value::Number(_) => DMatrix::from_element(1, 1, number(v, field)?),
        Value::Array(items) if items.is_empty() => {
            return Err(Error::schema(field, "empty matrix"));
        }
        Value::Array(items) if depth(v) == 1 => {
            let vals: Vec<f64> = items.iter().map(|x| number(x, field)).collect::<Result<_>>()?;
            if rows == Some(1) {
                DMatrix::from_row_slice(1, vals.len(), &vals)
            } else {
                DMatrix::from_column_slice(vals.len(), 1, &vals)
            }
        }
        Value::Array(items) if depth(v) == 2 => {
            let ncols = items[0].as_array().map_or(0, |r| r.len());
            let mut vals = Vec::with_capacity(items.len() * ncols);
            for (i, row) in items.iter().enumerate() {
                let row = row
                    .as_array()
                    .ok_or_else(|| Error::schema(field, format!("row {i} is not an array")))?;
                if row.len() != ncols {
                    return Err(Error::schema(
                        field,
                        format!("row {i} has {} entries, row 0 has {ncols}", row.len()),
                    ));
                }
                for x in row {
                    vals.push(number(x, field)?);
                }
            }
            DMatrix::from_row_slice(items.len(), ncols, &vals)
        }
        _ => return Err(Error::schema(field, "expected a number or a nested array")),
    };
    let shape_ok = rows.is_none_or(|r| r == mat.nrows()) && cols.is_none_or(|c| c == mat.ncols());
    if !shape_ok {
        let show = |d: Option<usize>| d.map_or("*".to_string(), |d| d.to_string());
        return Err(Error::schema(
            field,
            format!(
                "expected shape {}x{}, got {}x{}",
                show(rows),
                show(cols),
                mat.nrows(),
                mat.ncols()
            ),
        ));
    }
    Ok(mat)
}

fn parse_series(
    v: &Value,
    field: &str,
    rows: usize,
    cols: usize,
    horizon: usize,
) -> Result<Vec<DMatrix<f64>>> {
    if depth(v) == 3 {
        let items = v.as_array().expect("depth 3 implies array");
        if items.len() != horizon {
            return Err(Error::schema(
                field,
                format!("time-varying field has {} matrices, expected T = {horizon}", items.len()),
            ));
        }
        items
            .iter()
            .enumerate()
            .map(|(t, m)| parse_matrix(m, &format!("{field}[{t}]"), Some(rows), Some(cols)))
            .collect()
    } else {
        Ok(vec![parse_matrix(v, field, Some(rows), Some(cols))?; horizon])
    }
}

fn parse_vector(v: &Value, field: &str, len: usize) -> Result<DVector<f64>> {
    let mat = parse_matrix(v, field, None, None)?;
    if mat.len() != len || mat.ncols().min(mat.nrows()) != 1 {
        return Err(Error::schema(
            field,
            format!("expected a vector of length {len}, got {}x{}", mat.nrows(), mat.ncols()),
        ));
    }
    Ok(DVector::from_iterator(len, mat.iter().copied()))
}

fn dim(obj: &Map<String, Value>, field: &str) -> Result<usize> {
    let v = required(obj, field)?;
    v.as_u64()
        .filter(|&d| d >= 1)
        .map(|d| d as usize)
        .ok_or_else(|| Error::schema(field, format!("expected a positive integer, got {v}")))
}

fn required<'a>(obj: &'a Map<String, Value>, field: &str) -> Result<&'a Value> {
    obj.get(field)
        .ok_or_else(|| Error::schema(field, "required field is missing"))
}

fn parse_list(
    obj: &Map<String, Value>,
    field: &str,
    rows: usize,
    cols: usize,
) -> Result<Vec<DMatrix<f64>>> {
    match obj.get(field) {
        None => Ok(Vec::new()),
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, m)| parse_matrix(m, &format!("{field}[{i}]"), Some(rows), Some(cols)))
            .collect(),
        Some(_) => Err(Error::schema(field, "expected a list of matrices")),
    }
}

/// Parses a config document.
pub fn parse_model(text: &str) -> Result<ModelConfig> {
    let doc: Value = serde_json::from_str(text)?;
    let obj = doc
        .as_object()
        .ok_or_else(|| Error::schema("<root>", "expected a JSON object"))?;
    if let Some(unknown) = obj.keys().find(|k| !KNOWN_FIELDS.contains(&k.as_str())) {
        return Err(Error::schema(unknown.as_str(), "unknown field"));
    }
    let m = dim(obj, "m")?;
    let p = dim(obj, "p")?;
    let k = dim(obj, "k")?;
    let horizon = dim(obj, "T")?;

    let a = parse_series(required(obj, "A")?, "A", m, m, horizon)?;
    let b = parse_series(required(obj, "B")?, "B", m, p, horizon)?;
    let h = parse_series(required(obj, "H")?, "H", k, m, horizon)?;
    let v_scale = parse_matrix(required(obj, "V")?, "V", Some(m), None)?;
    let w_scale = parse_matrix(required(obj, "W")?, "W", Some(k), None)?;
    let e_scale = match obj.get("E") {
        Some(v) => parse_matrix(v, "E", Some(m), None)?,
        None => DMatrix::zeros(m, m),
    };
    let c_list = parse_list(obj, "C", m, p)?;
    let d_list = parse_list(obj, "D", k, m)?;
    let init_state_mean = parse_vector(required(obj, "x1_mean")?, "x1_mean", m)?;
    let init_state_cov = parse_matrix(required(obj, "x1_cov")?, "x1_cov", Some(m), Some(m))?;
    let init_estimate_mean = match obj.get("xhat1_mean") {
        Some(v) => parse_vector(v, "xhat1_mean", m)?,
        None => init_state_mean.clone(),
    };
    let init_estimate_cov = match obj.get("xhat1_cov") {
        Some(v) => parse_matrix(v, "xhat1_cov", Some(m), Some(m))?,
        None => DMatrix::zeros(m, m),
    };
    let q = parse_series(required(obj, "Q")?, "Q", m, m, horizon)?;
    let r = parse_series(required(obj, "R")?, "R", p, p, horizon)?;

    let exp = match (obj.get("M"), obj.get("N")) {
        (None, None) => None,
        (Some(mv), Some(nv)) => {
            let obs_map = parse_matrix(mv, "M", None, Some(m))?;
            let s = obs_map.nrows();
            let noise_scale = parse_matrix(nv, "N", Some(s), None)?;
            Some(ExperimenterObservationModel::new(obs_map, noise_scale))
        }
        (Some(_), None) => return Err(Error::schema("N", "required when M is given")),
        (None, Some(_)) => return Err(Error::schema("M", "required when N is given")),
    };

    let model = SystemModel {
        state_dim: m,
        control_dim: p,
        obs_dim: k,
        horizon,
        a,
        b,
        h,
        v_scale,
        c_list,
        w_scale,
        d_list,
        e_scale,
        init_state_mean,
        init_state_cov,
        init_estimate_mean,
        init_estimate_cov,
    };
    let cost = CostModel { q, r };

    let spec = match obj.get("param_spec") {
        Some(v) => {
            let spec: ParamSpec = serde_json::from_value(v.clone())
                .map_err(|e| Error::schema("param_spec", e.to_string()))?;
            spec.validate(&model, &cost)?;
            Some(spec)
        }
        None => None,
    };
    let theta = match obj.get("theta") {
        None => None,
        Some(v) => {
            let spec = spec
                .as_ref()
                .ok_or_else(|| Error::schema("theta", "needs `param_spec`"))?;
            let map: BTreeMap<String, f64> = serde_json::from_value(v.clone())
                .map_err(|e| Error::schema("theta", e.to_string()))?;
            let vals = spec
                .names
                .iter()
                .map(|n| {
                    map.get(n)
                        .copied()
                        .ok_or_else(|| Error::schema("theta", format!("no value for `{n}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            if map.len() != vals.len() {
                return Err(Error::schema("theta", "names must match `param_spec`"));
            }
            Some(vals)
        }
    };

    Ok(ModelConfig {
        model,
        cost,
        exp,
        spec,
        theta,
    })
}

fn num(x: f64) -> Result<Value> {
    serde_json::Number::from_f64(x)
        .map(Value::Number)
        .ok_or_else(|| Error::NonFinite("model config".into()))
}

fn matrix_value(mat: &DMatrix<f64>) -> Result<Value> {
    (0..mat.nrows())
        .map(|i| {
            (0..mat.ncols())
                .map(|j| num(mat[(i, j)]))
                .collect::<Result<Vec<_>>>()
                .map(Value::Array)
        })
        .collect::<Result<Vec<_>>>()
        .map(Value::Array)
}

fn series_value(series: &[DMatrix<f64>]) -> Result<Value> {
    if series.iter().all(|m| m == &series[0]) {
        matrix_value(&series[0])
    } else {
        series.iter().map(matrix_value).collect::<Result<Vec<_>>>().map(Value::Array)
    }
}

fn vector_value(v: &DVector<f64>) -> Result<Value> {
    v.iter().map(|&x| num(x)).collect::<Result<Vec<_>>>().map(Value::Array)
}

/// Canonical serialization: one top-level field per line, in a fixed order.
pub fn to_json_string(config: &ModelConfig) -> Result<String> {
    let md = &config.model;
    let mut fields: Vec<(&str, Value)> = vec![
        ("m", md.state_dim.into()),
        ("p", md.control_dim.into()),
        ("k", md.obs_dim.into()),
        ("T", md.horizon.into()),
        ("A", series_value(&md.a)?),
        ("B", series_value(&md.b)?),
        ("H", series_value(&md.h)?),
        ("V", matrix_value(&md.v_scale)?),
        ("C", md.c_list.iter().map(matrix_value).collect::<Result<Vec<_>>>()?.into()),
        ("W", matrix_value(&md.w_scale)?),
        ("D", md.d_list.iter().map(matrix_value).collect::<Result<Vec<_>>>()?.into()),
        ("E", matrix_value(&md.e_scale)?),
        ("x1_mean", vector_value(&md.init_state_mean)?),
        ("x1_cov", matrix_value(&md.init_state_cov)?),
        ("xhat1_mean", vector_value(&md.init_estimate_mean)?),
        ("xhat1_cov", matrix_value(&md.init_estimate_cov)?),
        ("Q", series_value(&config.cost.q)?),
        ("R", series_value(&config.cost.r)?),
    ];
    if let Some(exp) = &config.exp {
        fields.push(("M", matrix_value(&exp.obs_map)?));
        fields.push(("N", matrix_value(&exp.noise_scale)?));
    }
    if let Some(spec) = &config.spec {
        fields.push(("param_spec", serde_json::to_value(spec)?));
        if let Some(theta) = &config.theta {
            let map: BTreeMap<&str, f64> =
                spec.names.iter().map(String::as_str).zip(theta.iter().copied()).collect();
            fields.push(("theta", serde_json::to_value(map)?));
        }
    }
    let body: Vec<String> = fields
        .iter()
        .map(|(k, v)| format!("  \"{k}\": {v}"))
        .collect();
    Ok(format!("{{\n{}\n}}\n", body.join(",\n")))
}
