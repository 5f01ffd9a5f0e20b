//! Problem definition: dynamics, agent and experimenter observation models,
//! noise scales and quadratic costs.
//!
//! Every noise term is a standard Gaussian premultiplied by a scale matrix,
//! so covariances are stored as factors (`cov = scale·scaleᵀ`). Matrices that
//! may vary over time are stored with one slot per timestep; a constant
//! matrix is simply repeated.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{self, PSD_TOL};

/// Linear dynamical system with control-dependent process noise and
/// state-dependent observation noise.
///
/// ```text
/// x[t+1] = A x[t] + B u[t] + V ξ + Σᵢ εⁱ Cᵢ u[t]
/// y[t]   = H x[t] + W ω + Σᵢ εⁱ Dᵢ x[t]
/// x̃[t+1] = A x̃[t] + B u[t] + K[t] (y[t] − H x̃[t]) + E η
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct SystemModel {
    pub state_dim: usize,
    pub control_dim: usize,
    pub obs_dim: usize,
    pub horizon: usize,
    /// State transition, one m×m matrix per timestep.
    pub a: Vec<DMatrix<f64>>,
    /// Control gain, one m×p matrix per timestep.
    pub b: Vec<DMatrix<f64>>,
    /// Agent observation map, one k×m matrix per timestep.
    pub h: Vec<DMatrix<f64>>,
    pub v_scale: DMatrix<f64>,
    /// Control-dependent process-noise scales (m×p each).
    pub c_list: Vec<DMatrix<f64>>,
    pub w_scale: DMatrix<f64>,
    /// State-dependent observation-noise scales (k×m each).
    pub d_list: Vec<DMatrix<f64>>,
    /// Agent's internal estimation-noise scale.
    pub e_scale: DMatrix<f64>,
    pub init_state_mean: DVector<f64>,
    pub init_state_cov: DMatrix<f64>,
    pub init_estimate_mean: DVector<f64>,
    pub init_estimate_cov: DMatrix<f64>,
}

impl SystemModel {
    /// Builds a time-invariant model with zero noise and a known initial state.
    pub fn time_invariant(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        h: DMatrix<f64>,
        horizon: usize,
    ) -> Self {
        let m = a.nrows();
        let p = b.ncols();
        let k = h.nrows();
        SystemModel {
            state_dim: m,
            control_dim: p,
            obs_dim: k,
            horizon,
            a: vec![a; horizon],
            b: vec![b; horizon],
            h: vec![h; horizon],
            v_scale: DMatrix::zeros(m, m),
            c_list: Vec::new(),
            w_scale: DMatrix::zeros(k, k),
            d_list: Vec::new(),
            e_scale: DMatrix::zeros(m, m),
            init_state_mean: DVector::zeros(m),
            init_state_cov: DMatrix::zeros(m, m),
            init_estimate_mean: DVector::zeros(m),
            init_estimate_cov: DMatrix::zeros(m, m),
        }
    }

    /// True when the model has no signal-dependent noise terms.
    pub fn is_plain_lqg(&self) -> bool {
        self.c_list.is_empty() && self.d_list.is_empty()
    }

    /// Copy with the control- and state-dependent noise removed.
    pub fn without_signal_noise(&self) -> Self {
        SystemModel {
            c_list: Vec::new(),
            d_list: Vec::new(),
            ..self.clone()
        }
    }

    /// Copy with every noise source and the initial uncertainty set to zero.
    pub fn noiseless(&self) -> Self {
        let (m, k) = (self.state_dim, self.obs_dim);
        SystemModel {
            v_scale: DMatrix::zeros(m, m),
            c_list: self.c_list.iter().map(|c| c * 0.0).collect(),
            w_scale: DMatrix::zeros(k, k),
            d_list: self.d_list.iter().map(|d| d * 0.0).collect(),
            e_scale: DMatrix::zeros(m, m),
            init_state_cov: DMatrix::zeros(m, m),
            init_estimate_cov: DMatrix::zeros(m, m),
            ..self.clone()
        }
    }

    pub fn process_cov(&self) -> DMatrix<f64> {
        linalg::outer_scale(&self.v_scale)
    }

    pub fn obs_noise_cov(&self) -> DMatrix<f64> {
        linalg::outer_scale(&self.w_scale)
    }

    pub fn estimation_noise_cov(&self) -> DMatrix<f64> {
        linalg::outer_scale(&self.e_scale)
    }
}

/// Quadratic cost `Σₜ xₜᵀQₜxₜ + uₜᵀRₜuₜ`.
#[derive(Clone, Debug, PartialEq)]
pub struct CostModel {
    pub q: Vec<DMatrix<f64>>,
    pub r: Vec<DMatrix<f64>>,
}

impl CostModel {
    pub fn scaled(&self, alpha: f64) -> Self {
        CostModel {
            q: self.q.iter().map(|q| q * alpha).collect(),
            r: self.r.iter().map(|r| r * alpha).collect(),
        }
    }
}

/// The experimenter's measurement `o = M x + N ζ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimenterObservationModel {
    /// s×m observation map.
    pub obs_map: DMatrix<f64>,
    /// s×s noise scale.
    pub noise_scale: DMatrix<f64>,
}

impl ExperimenterObservationModel {
    pub fn new(obs_map: DMatrix<f64>, noise_scale: DMatrix<f64>) -> Self {
        ExperimenterObservationModel {
            obs_map,
            noise_scale,
        }
    }

    /// Noisy observation of a subset of state components.
    pub fn select(state_dim: usize, components: &[usize], noise_sd: f64) -> Self {
        let s = components.len();
        let mut obs_map = DMatrix::zeros(s, state_dim);
        for (row, &c) in components.iter().enumerate() {
            obs_map[(row, c)] = 1.0;
        }
        ExperimenterObservationModel {
            obs_map,
            noise_scale: DMatrix::identity(s, s) * noise_sd,
        }
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_map.nrows()
    }

    pub fn noise_cov(&self) -> DMatrix<f64> {
        linalg::outer_scale(&self.noise_scale)
    }
}

/// Time-indexed controller gains `L` (p×m) and filter gains `K` (m×k).
#[derive(Clone, Debug, PartialEq)]
pub struct GainSchedule {
    pub l: Vec<DMatrix<f64>>,
    pub k: Vec<DMatrix<f64>>,
}

impl GainSchedule {
    pub fn horizon(&self) -> usize {
        self.l.len()
    }
}

/// Outcome of [`validate_model`]; an empty failure list means the model passed.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ValidationReport {
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, msg: impl Into<String>) {
        self.failures.push(msg.into());
    }

    /// Converts a failing report into an error.
    pub fn into_result(self) -> crate::Result<()> {
        if self.passed() {
            Ok(())
        } else {
            Err(crate::Error::InvalidModel(self.failures.join("; ")))
        }
    }
}

fn check_shape(
    report: &mut ValidationReport,
    name: &str,
    mat: &DMatrix<f64>,
    rows: usize,
    cols: usize,
) -> bool {
    if mat.shape() != (rows, cols) {
        report.fail(format!(
            "{name}: shape mismatch, expected {rows}x{cols}, got {}x{}",
            mat.nrows(),
            mat.ncols()
        ));
        return false;
    }
    if !linalg::all_finite(mat) {
        report.fail(format!("{name}: non-finite entry"));
        return false;
    }
    true
}

fn check_series(
    report: &mut ValidationReport,
    name: &str,
    series: &[DMatrix<f64>],
    horizon: usize,
    rows: usize,
    cols: usize,
) -> bool {
    if series.len() != horizon {
        report.fail(format!(
            "{name}: expected {horizon} timesteps, got {}",
            series.len()
        ));
        return false;
    }
    series
        .iter()
        .enumerate()
        .all(|(t, mat)| check_shape(report, &format!("{name}[{t}]"), mat, rows, cols))
}

/// Checks shapes, finiteness and definiteness of a model and its cost.
pub fn validate_model(model: &SystemModel, cost: &CostModel) -> ValidationReport {
    let mut report = ValidationReport::default();
    let (m, p, k, horizon) = (
        model.state_dim,
        model.control_dim,
        model.obs_dim,
        model.horizon,
    );
    if m == 0 || p == 0 || k == 0 || horizon == 0 {
        report.fail("dimensions m, p, k and T must be positive");
        return report;
    }
    check_series(&mut report, "A", &model.a, horizon, m, m);
    check_series(&mut report, "B", &model.b, horizon, m, p);
    check_series(&mut report, "H", &model.h, horizon, k, m);
    check_shape(&mut report, "V", &model.v_scale, m, m);
    check_shape(&mut report, "W", &model.w_scale, k, k);
    check_shape(&mut report, "E", &model.e_scale, m, m);
    for (i, c) in model.c_list.iter().enumerate() {
        check_shape(&mut report, &format!("C[{i}]"), c, m, p);
    }
    for (i, d) in model.d_list.iter().enumerate() {
        check_shape(&mut report, &format!("D[{i}]"), d, k, m);
    }
    for (name, v) in [
        ("x1_mean", &model.init_state_mean),
        ("xhat1_mean", &model.init_estimate_mean),
    ] {
        if v.len() != m {
            report.fail(format!("{name}: expected length {m}, got {}", v.len()));
        } else if v.iter().any(|x| !x.is_finite()) {
            report.fail(format!("{name}: non-finite entry"));
        }
    }
    for (name, cov) in [
        ("x1_cov", &model.init_state_cov),
        ("xhat1_cov", &model.init_estimate_cov),
    ] {
        if check_shape(&mut report, name, cov, m, m) && linalg::min_eigenvalue(cov) < PSD_TOL {
            report.fail(format!("{name}: not positive semi-definite"));
        }
    }

    if check_series(&mut report, "Q", &cost.q, horizon, m, m) {
        for (t, q) in cost.q.iter().enumerate() {
            if linalg::min_eigenvalue(q) < PSD_TOL {
                report.fail(format!("Q[{t}]: Q not positive semi-definite"));
            }
        }
    }
    if check_series(&mut report, "R", &cost.r, horizon, p, p) {
        for (t, r) in cost.r.iter().enumerate() {
            if linalg::min_eigenvalue(r) <= 0.0 {
                report.fail(format!("R[{t}]: R not positive definite"));
            }
        }
    }
    report
}

/// Checks the experimenter's observation model against a state dimension.
pub fn validate_experimenter(
    exp: &ExperimenterObservationModel,
    state_dim: usize,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    let s = exp.obs_dim();
    if s == 0 {
        report.fail("M: experimenter observation dimension must be positive");
        return report;
    }
    check_shape(&mut report, "M", &exp.obs_map, s, state_dim);
    check_shape(&mut report, "N", &exp.noise_scale, s, s);
    report
}
