//! Low-dimensional parameterizations of a model and its cost.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostModel, SystemModel};

/// Matrix family a parameter is written into.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MatrixPath {
    A,
    B,
    H,
    V,
    W,
    E,
    C(usize),
    D(usize),
    Q,
    R,
}

impl fmt::Display for MatrixPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixPath::A => write!(f, "A"),
            MatrixPath::B => write!(f, "B"),
            MatrixPath::H => write!(f, "H"),
            MatrixPath::V => write!(f, "V"),
            MatrixPath::W => write!(f, "W"),
            MatrixPath::E => write!(f, "E"),
            MatrixPath::C(i) => write!(f, "C[{i}]"),
            MatrixPath::D(i) => write!(f, "D[{i}]"),
            MatrixPath::Q => write!(f, "Q"),
            MatrixPath::R => write!(f, "R"),
        }
    }
}

impl FromStr for MatrixPath {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let indexed = |prefix: &str| -> Option<usize> {
            s.strip_prefix(prefix)?.strip_suffix(']')?.parse().ok()
        };
        Ok(match s {
            "A" => MatrixPath::A,
            "B" => MatrixPath::B,
            "H" => MatrixPath::H,
            "V" => MatrixPath::V,
            "W" => MatrixPath::W,
            "E" => MatrixPath::E,
            "Q" => MatrixPath::Q,
            "R" => MatrixPath::R,
            _ => {
                if let Some(i) = indexed("C[") {
                    MatrixPath::C(i)
                } else if let Some(i) = indexed("D[") {
                    MatrixPath::D(i)
                } else {
                    return Err(format!("unknown matrix path `{s}`"));
                }
            }
        })
    }
}

impl From<MatrixPath> for String {
    fn from(p: MatrixPath) -> String {
        p.to_string()
    }
}

impl TryFrom<String> for MatrixPath {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

/// Which timesteps of a time-indexed matrix a binding touches.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeSelector {
    All,
    Last,
    Step(usize),
}

/// Writes `scale · θ^power` into one matrix entry (and its mirror when
/// `mirror` is set).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Binding {
    pub path: MatrixPath,
    #[serde(default = "default_time")]
    pub time: TimeSelector,
    pub row: usize,
    pub col: usize,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default = "one")]
    pub power: f64,
    #[serde(default)]
    pub mirror: bool,
}

fn default_time() -> TimeSelector {
    TimeSelector::All
}

fn one() -> f64 {
    1.0
}

impl Binding {
    pub fn entry(path: MatrixPath, row: usize, col: usize) -> Self {
        Binding {
            path,
            time: TimeSelector::All,
            row,
            col,
            scale: 1.0,
            power: 1.0,
            mirror: false,
        }
    }

    pub fn at(mut self, time: TimeSelector) -> Self {
        self.time = time;
        self
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn pow(mut self, power: f64) -> Self {
        self.power = power;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Log10,
    Identity,
}

impl Transform {
    pub fn forward(self, x: f64) -> f64 {
        match self {
            Transform::Log10 => x.log10(),
            Transform::Identity => x,
        }
    }

    pub fn inverse(self, y: f64) -> f64 {
        match self {
            Transform::Log10 => 10f64.powf(y),
            Transform::Identity => y,
        }
    }
}

/// Names, bindings, transforms and transformed-space bounds of θ.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub names: Vec<String>,
    pub targets: Vec<Vec<Binding>>,
    pub transform: Vec<Transform>,
    pub bounds: Vec<(f64, f64)>,
}

impl ParamSpec {
    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Adds a log-space parameter with bounds three decades either side of `base`.
    pub fn push_log(&mut self, name: &str, base: f64, targets: Vec<Binding>) {
        let c = base.log10();
        self.push(name, Transform::Log10, (c - 3.0, c + 3.0), targets);
    }

    pub fn push(
        &mut self,
        name: &str,
        transform: Transform,
        bounds: (f64, f64),
        targets: Vec<Binding>,
    ) {
        self.names.push(name.to_string());
        self.transform.push(transform);
        self.bounds.push(bounds);
        self.targets.push(targets);
    }

    pub fn to_transformed(&self, natural: &[f64]) -> Vec<f64> {
        natural
            .iter()
            .zip(&self.transform)
            .map(|(&x, t)| t.forward(x))
            .collect()
    }

    pub fn to_natural(&self, transformed: &[f64]) -> Vec<f64> {
        transformed
            .iter()
            .zip(&self.transform)
            .map(|(&y, t)| t.inverse(y))
            .collect()
    }

    pub fn lower(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| b.0).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.bounds.iter().map(|b| b.1).collect()
    }

    /// Structural checks, plus that every binding resolves in the given model.
    pub fn validate(&self, model: &SystemModel, cost: &CostModel) -> Result<()> {
        let n = self.names.len();
        if self.targets.len() != n || self.transform.len() != n || self.bounds.len() != n {
            return Err(Error::schema(
                "param_spec",
                "names, targets, transform and bounds must have equal length",
            ));
        }
        for (i, name) in self.names.iter().enumerate() {
            let (lo, hi) = self.bounds[i];
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::schema(
                    "param_spec.bounds",
                    format!("`{name}` needs finite bounds with lo < hi"),
                ));
            }
            for b in &self.targets[i] {
                let mats = matrices(model, cost, b.path)
                    .ok_or_else(|| Error::schema("param_spec.targets", format!("`{name}`: no matrix {}", b.path)))?;
                for t in time_slots(b.time, mats.len()) {
                    let shape = mats.get(t).map(|m| m.shape()).ok_or_else(|| {
                        Error::schema(
                            "param_spec.targets",
                            format!("`{name}`: {} has no timestep {t}", b.path),
                        )
                    })?;
                    if b.row >= shape.0 || b.col >= shape.1 {
                        return Err(Error::schema(
                            "param_spec.targets",
                            format!(
                                "`{name}`: entry ({}, {}) outside {} of shape {}x{}",
                                b.row, b.col, b.path, shape.0, shape.1
                            ),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// Natural-space values currently stored at each parameter's first binding.
    pub fn read(&self, model: &SystemModel, cost: &CostModel) -> Vec<f64> {
        self.targets
            .iter()
            .map(|targets| {
                let b = &targets[0];
                let mats = matrices(model, cost, b.path).expect("validated binding");
                let t = time_slots(b.time, mats.len())[0];
                (mats[t][(b.row, b.col)] / b.scale).powf(1.0 / b.power)
            })
            .collect()
    }
}

fn time_slots(sel: TimeSelector, len: usize) -> Vec<usize> {
    match sel {
        TimeSelector::All => (0..len).collect(),
        TimeSelector::Last => vec![len.saturating_sub(1)],
        TimeSelector::Step(t) => vec![t],
    }
}

fn matrices<'a>(
    model: &'a SystemModel,
    cost: &'a CostModel,
    path: MatrixPath,
) -> Option<&'a [DMatrix<f64>]> {
    Some(match path {
        MatrixPath::A => &model.a,
        MatrixPath::B => &model.b,
        MatrixPath::H => &model.h,
        MatrixPath::V => std::slice::from_ref(&model.v_scale),
        MatrixPath::W => std::slice::from_ref(&model.w_scale),
        MatrixPath::E => std::slice::from_ref(&model.e_scale),
        MatrixPath::C(i) => std::slice::from_ref(model.c_list.get(i)?),
        MatrixPath::D(i) => std::slice::from_ref(model.d_list.get(i)?),
        MatrixPath::Q => &cost.q,
        MatrixPath::R => &cost.r,
    })
}

fn matrices_mut<'a>(
    model: &'a mut SystemModel,
    cost: &'a mut CostModel,
    path: MatrixPath,
) -> Option<&'a mut [DMatrix<f64>]> {
    Some(match path {
        MatrixPath::A => &mut model.a,
        MatrixPath::B => &mut model.b,
        MatrixPath::H => &mut model.h,
        MatrixPath::V => std::slice::from_mut(&mut model.v_scale),
        MatrixPath::W => std::slice::from_mut(&mut model.w_scale),
        MatrixPath::E => std::slice::from_mut(&mut model.e_scale),
        MatrixPath::C(i) => std::slice::from_mut(model.c_list.get_mut(i)?),
        MatrixPath::D(i) => std::slice::from_mut(model.d_list.get_mut(i)?),
        MatrixPath::Q => &mut cost.q,
        MatrixPath::R => &mut cost.r,
    })
}

/// Copies of the base model and cost with θ (natural space) written into
/// the bound entries.
pub fn apply_params(
    spec: &ParamSpec,
    theta: &[f64],
    base_model: &SystemModel,
    base_cost: &CostModel,
) -> Result<(SystemModel, CostModel)> {
    if theta.len() != spec.len() {
        return Err(Error::Shape(format!(
            "θ has {} entries, spec has {}",
            theta.len(),
            spec.len()
        )));
    }
    let mut model = base_model.clone();
    let mut cost = base_cost.clone();
    for (i, &value) in theta.iter().enumerate() {
        let (lo, hi) = spec.bounds[i];
        let y = spec.transform[i].forward(value);
        let slack = 1e-12 * (hi - lo).abs().max(1.0);
        if !(y >= lo - slack && y <= hi + slack) {
            return Err(Error::OutOfBounds {
                name: spec.names[i].clone(),
                value,
                lo: spec.transform[i].inverse(lo),
                hi: spec.transform[i].inverse(hi),
            });
        }
        for b in &spec.targets[i] {
            let written = b.scale * value.powf(b.power);
            let mats = matrices_mut(&mut model, &mut cost, b.path).ok_or_else(|| {
                Error::schema("param_spec.targets", format!("no matrix {}", b.path))
            })?;
            let len = mats.len();
            for t in time_slots(b.time, len) {
                let mat = mats.get_mut(t).ok_or_else(|| {
                    Error::schema("param_spec.targets", format!("{} has no timestep {t}", b.path))
                })?;
                if b.row >= mat.nrows() || b.col >= mat.ncols() {
                    return Err(Error::schema(
                        "param_spec.targets",
                        format!("entry ({}, {}) outside {}", b.row, b.col, b.path),
                    ));
                }
                mat[(b.row, b.col)] = written;
                if b.mirror {
                    mat[(b.col, b.row)] = written;
                }
            }
        }
    }
    Ok((model, cost))
}
