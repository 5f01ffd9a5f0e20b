//! Bound-constrained derivative-free minimization by quadratic interpolation
//! in a trust region.
//!
//! The model interpolates `2n + 1` points. Its Hessian is updated by the
//! least Frobenius-norm change that restores interpolation after a point is
//! replaced, so the first model has minimum-norm curvature. Steps come from a
//! truncated conjugate-gradient solve of the bounded trust-region
//! subproblem; points with poor Lagrange values are moved to keep the
//! interpolation set well poised.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct DfoOptions {
    /// Maximum number of objective evaluations.
    pub budget: usize,
    /// Initial trust-region radius; defaults to a quarter of the narrowest bound width.
    pub rho_begin: Option<f64>,
    pub rho_end: f64,
}

impl Default for DfoOptions {
    fn default() -> Self {
        DfoOptions {
            budget: 1000,
            rho_begin: None,
            rho_end: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DfoResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub n_evals: usize,
    /// True when the radius shrank below `rho_end` before the budget ran out.
    pub converged: bool,
}

struct Counter<F> {
    f: F,
    evals: usize,
    budget: usize,
}

impl<F: FnMut(&[f64]) -> f64> Counter<F> {
    fn call(&mut self, x: &DVector<f64>) -> f64 {
        self.evals += 1;
        (self.f)(x.as_slice())
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.budget
    }
}

/// Interpolation set plus the quadratic model around its best point.
struct Interp {
    points: Vec<DVector<f64>>,
    fvals: Vec<f64>,
    opt: usize,
    /// Hessian of the current model in natural coordinates.
    hess: DMatrix<f64>,
    grad: DVector<f64>,
    /// Inverse of the interpolation system, in scaled coordinates.
    hinv: DMatrix<f64>,
    scale: f64,
}

impl Interp {
    fn n(&self) -> usize {
        self.hess.nrows()
    }

    fn npt(&self) -> usize {
        self.points.len()
    }

    fn xopt(&self) -> &DVector<f64> {
        &self.points[self.opt]
    }

    fn fopt(&self) -> f64 {
        self.fvals[self.opt]
    }

    fn dist(&self, k: usize) -> f64 {
        (&self.points[k] - self.xopt()).norm()
    }

    /// Refits the model around the best point. Returns false when the
    /// interpolation system is singular.
    fn refit(&mut self) -> bool {
        let (n, npt) = (self.n(), self.npt());
        let xopt = self.xopt().clone();
        let scale = (0..npt)
            .map(|k| (&self.points[k] - &xopt).norm())
            .fold(0.0, f64::max);
        if scale == 0.0 {
            return false;
        }
        let s: Vec<DVector<f64>> = self.points.iter().map(|p| (p - &xopt) / scale).collect();

        let dim = npt + n + 1;
        let mut w = DMatrix::zeros(dim, dim);
        for i in 0..npt {
            for j in 0..npt {
                w[(i, j)] = 0.5 * s[i].dot(&s[j]).powi(2);
            }
            w[(i, npt)] = 1.0;
            w[(npt, i)] = 1.0;
            for c in 0..n {
                w[(i, npt + 1 + c)] = s[i][c];
                w[(npt + 1 + c, i)] = s[i][c];
            }
        }
        let Some(hinv) = w.try_inverse() else {
            return false;
        };
        if !hinv.iter().all(|v| v.is_finite()) {
            return false;
        }

        let hess_scaled = &self.hess * (scale * scale);
        let fopt = self.fopt();
        let mut rhs = DVector::zeros(dim);
        for k in 0..npt {
            rhs[k] = self.fvals[k] - fopt - 0.5 * (s[k].transpose() * &hess_scaled * &s[k])[(0, 0)];
        }
        let sol = &hinv * rhs;
        let mut delta_hess = DMatrix::zeros(n, n);
        for k in 0..npt {
            delta_hess.ger(sol[k], &s[k], &s[k], 1.0);
        }
        self.hess = (hess_scaled + delta_hess) / (scale * scale);
        self.grad = sol.rows(npt + 1, n) / scale;
        self.hinv = hinv;
        self.scale = scale;
        true
    }

    /// Values of every Lagrange function at `xopt + d`.
    fn lagrange(&self, d: &DVector<f64>) -> DVector<f64> {
        let (n, npt) = (self.n(), self.npt());
        let xopt = self.xopt();
        let ds = d / self.scale;
        let mut w = DVector::zeros(npt + n + 1);
        for k in 0..npt {
            let sk = (&self.points[k] - xopt) / self.scale;
            w[k] = 0.5 * sk.dot(&ds).powi(2);
        }
        w[npt] = 1.0;
        w.rows_mut(npt + 1, n).copy_from(&ds);
        self.hinv.rows(0, npt) * w
    }

    /// Gradient at `xopt` of Lagrange function `k`, in natural coordinates.
    fn lagrange_grad(&self, k: usize) -> DVector<f64> {
        let n = self.n();
        let npt = self.npt();
        self.hinv.view((npt + 1, k), (n, 1)).column(0) / self.scale
    }

    fn predicted_decrease(&self, d: &DVector<f64>) -> f64 {
        -(self.grad.dot(d) + 0.5 * (d.transpose() * &self.hess * d)[(0, 0)])
    }
}

/// Approximately minimizes `gᵀd + ½dᵀGd` over `‖d‖ ≤ delta`, `lo ≤ d ≤ hi`.
fn trust_region_step(
    g: &DVector<f64>,
    hess: &DMatrix<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    delta: f64,
) -> DVector<f64> {
    let n = g.len();
    let mut d = DVector::zeros(n);
    let mut fixed = vec![false; n];
    for i in 0..n {
        if (lo[i] >= 0.0 && g[i] > 0.0) || (hi[i] <= 0.0 && g[i] < 0.0) {
            fixed[i] = true;
        }
    }
    'restart: for _ in 0..=n {
        let mask = |v: &mut DVector<f64>| {
            for i in 0..n {
                if fixed[i] {
                    v[i] = 0.0;
                }
            }
        };
        let mut r = -(g + hess * &d);
        mask(&mut r);
        let mut p = r.clone();
        let mut rr = r.norm_squared();
        let tol = 1e-20 * g.norm_squared().max(1e-300);
        for _ in 0..n {
            if rr <= tol {
                return d;
            }
            let gp = hess * &p;
            let curv = p.dot(&gp);
            // Largest step along p that stays inside the ball.
            let (a, b, c) = (p.norm_squared(), d.dot(&p), d.norm_squared() - delta * delta);
            let alpha_tr = (-b + (b * b - a * c).max(0.0).sqrt()) / a;
            let mut alpha_bd = f64::INFINITY;
            let mut hit = None;
            for i in 0..n {
                if fixed[i] || p[i] == 0.0 {
                    continue;
                }
                let room = if p[i] > 0.0 { (hi[i] - d[i]) / p[i] } else { (lo[i] - d[i]) / p[i] };
                if room < alpha_bd {
                    alpha_bd = room.max(0.0);
                    hit = Some(i);
                }
            }
            let alpha_cg = if curv > 0.0 { rr / curv } else { f64::INFINITY };
            let alpha = alpha_cg.min(alpha_tr).min(alpha_bd);
            d += &p * alpha;
            if alpha == alpha_bd && alpha < alpha_tr.min(alpha_cg) {
                let i = hit.expect("bound hit");
                d[i] = if p[i] > 0.0 { hi[i] } else { lo[i] };
                fixed[i] = true;
                continue 'restart;
            }
            if alpha >= alpha_tr {
                return d;
            }
            r -= &gp * alpha;
            mask(&mut r);
            let rr_new = r.norm_squared();
            p = &r + &p * (rr_new / rr);
            rr = rr_new;
        }
        return d;
    }
    d
}

/// Step from `xopt` of length about `delta` that makes Lagrange function `k` large.
fn geometry_step(
    interp: &Interp,
    k: usize,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    delta: f64,
) -> DVector<f64> {
    let n = interp.n();
    let xopt = interp.xopt();
    let mut directions: Vec<DVector<f64>> = Vec::new();
    let g = interp.lagrange_grad(k);
    if g.norm() > 0.0 {
        directions.push(g.normalize());
    }
    for j in 0..interp.npt() {
        if j != interp.opt {
            let v = &interp.points[j] - xopt;
            if v.norm() > 0.0 {
                directions.push(v.normalize());
            }
        }
    }
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        directions.push(e);
    }
    let mut best = DVector::zeros(n);
    let mut best_val = -1.0;
    for dir in directions {
        for sign in [1.0, -1.0] {
            let mut d = &dir * (sign * delta);
            for i in 0..n {
                d[i] = d[i].clamp(lo[i], hi[i]);
            }
            if d.norm() < 1e-3 * delta {
                continue;
            }
            let val = interp.lagrange(&d)[k].abs();
            if val > best_val {
                best_val = val;
                best = d;
            }
        }
    }
    best
}

fn clip(x: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(x.len(), (0..x.len()).map(|i| x[i].clamp(lo[i], hi[i])))
}

/// Initial interpolation set: `x0` and two offsets along each coordinate,
/// both on the roomier side when `x0` is near a bound.
fn initial_points(x0: &DVector<f64>, lo: &DVector<f64>, hi: &DVector<f64>, rho: f64) -> Vec<DVector<f64>> {
    let n = x0.len();
    let mut pts = vec![x0.clone()];
    let mut second = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b) = if x0[i] - rho >= lo[i] && x0[i] + rho <= hi[i] {
            (rho, -rho)
        } else if x0[i] + 2.0 * rho <= hi[i] {
            (rho, 2.0 * rho)
        } else {
            (-rho, -2.0 * rho)
        };
        let mut p = x0.clone();
        p[i] += a;
        pts.push(p);
        let mut q = x0.clone();
        q[i] += b;
        second.push(q);
    }
    pts.extend(second);
    pts
}

/// Minimizes a black-box function inside the box `[lo, hi]`.
///
/// Non-finite objective values are treated as failed steps; non-finite
/// values in the initial set are replaced by a penalty above the worst
/// finite value.
pub fn minimize_dfo<F>(
    objective: F,
    lo: &[f64],
    hi: &[f64],
    x0: &[f64],
    opts: &DfoOptions,
) -> Result<DfoResult>
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    if lo.len() != n || hi.len() != n {
        return Err(Error::Shape("bounds and x0 differ in length".into()));
    }
    for i in 0..n {
        if !lo[i].is_finite() || !hi[i].is_finite() || lo[i] >= hi[i] {
            return Err(Error::InvalidInput(format!("bad bounds at coordinate {i}")));
        }
        if !(x0[i] >= lo[i] && x0[i] <= hi[i]) {
            return Err(Error::InvalidInput(format!(
                "x0[{i}] = {} outside [{}, {}]",
                x0[i], lo[i], hi[i]
            )));
        }
    }
    if opts.budget < n + 2 {
        return Err(Error::InvalidInput(format!(
            "budget {} below dimension + 2",
            opts.budget
        )));
    }
    let mut counter = Counter {
        f: objective,
        evals: 0,
        budget: opts.budget,
    };
    let x0 = DVector::from_column_slice(x0);
    if n == 0 {
        let f = counter.call(&x0);
        return Ok(DfoResult {
            x: Vec::new(),
            f,
            n_evals: 1,
            converged: true,
        });
    }
    let lo = DVector::from_column_slice(lo);
    let hi = DVector::from_column_slice(hi);
    let min_width = (0..n).map(|i| hi[i] - lo[i]).fold(f64::INFINITY, f64::min);
    let rho_begin = opts.rho_begin.unwrap_or(0.25 * min_width).min(0.25 * min_width);
    let rho_end = opts.rho_end.min(rho_begin);

    let points = initial_points(&x0, &lo, &hi, rho_begin);
    let mut fvals = Vec::with_capacity(points.len());
    for p in &points {
        if counter.exhausted() {
            break;
        }
        fvals.push(counter.call(p));
    }
    if fvals.len() < points.len() {
        let k = argmin(&fvals);
        return Ok(DfoResult {
            x: points[k].as_slice().to_vec(),
            f: fvals[k],
            n_evals: counter.evals,
            converged: false,
        });
    }
    let worst = fvals.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if worst == f64::NEG_INFINITY {
        return Ok(DfoResult {
            x: x0.as_slice().to_vec(),
            f: f64::INFINITY,
            n_evals: counter.evals,
            converged: false,
        });
    }
    let best = fvals.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let penalty = worst + 10.0 * (worst - best).max(1.0 + worst.abs());
    for v in fvals.iter_mut() {
        if !v.is_finite() {
            *v = penalty;
        }
    }
    let opt = argmin(&fvals);
    let mut interp = Interp {
        points,
        fvals,
        opt,
        hess: DMatrix::zeros(n, n),
        grad: DVector::zeros(n),
        hinv: DMatrix::zeros(0, 0),
        scale: 1.0,
    };

    let mut rho = rho_begin;
    let mut delta = rho_begin;
    let converged;

    let finish = |interp: &Interp, evals: usize, converged: bool| {
        DfoResult {
            x: interp.xopt().as_slice().to_vec(),
            f: interp.fopt(),
            n_evals: evals,
            converged,
        }
    };

    loop {
        if !interp.refit() {
            // Degenerate set: rebuild it around the best point.
            let centre = interp.xopt().clone();
            let f_centre = interp.fopt();
            let r = rho.max(rho_end);
            let pts = initial_points(&centre, &lo, &hi, r);
            let mut fv = vec![f_centre];
            for p in pts.iter().skip(1) {
                if counter.exhausted() {
                    return Ok(finish(&interp, counter.evals, false));
                }
                let v = counter.call(p);
                fv.push(if v.is_finite() { v } else { penalty.max(f_centre) });
            }
            interp.points = pts;
            interp.fvals = fv;
            interp.opt = argmin(&interp.fvals);
            interp.hess = DMatrix::zeros(n, n);
            if !interp.refit() {
                return Ok(finish(&interp, counter.evals, false));
            }
        }

        let xopt = interp.xopt().clone();
        let d = trust_region_step(&interp.grad, &interp.hess, &(&lo - &xopt), &(&hi - &xopt), delta);
        let dnorm = d.norm();
        let mut reduce_rho = false;

        if dnorm < 0.5 * rho {
            delta = (0.1 * delta).max(rho);
            let far = far_point(&interp, (2.0 * delta).max(10.0 * rho));
            match far {
                Some(k) if rho > rho_end => {
                    if !move_point(&mut interp, &mut counter, k, &lo, &hi, delta, rho, penalty) {
                        return Ok(finish(&interp, counter.evals, false));
                    }
                }
                _ => reduce_rho = true,
            }
        } else {
            if counter.exhausted() {
                return Ok(finish(&interp, counter.evals, false));
            }
            let xnew = clip(&(&xopt + &d), &lo, &hi);
            let d = &xnew - &xopt;
            let pred = interp.predicted_decrease(&d);
            let fnew = counter.call(&xnew);
            let fopt = interp.fopt();
            let ratio = if !fnew.is_finite() {
                -1.0
            } else if pred > 0.0 {
                (fopt - fnew) / pred
            } else {
                -1.0
            };
            let dn = d.norm();
            delta = if ratio <= 0.1 {
                (0.5 * delta).min(dn)
            } else if ratio <= 0.7 {
                (0.5 * delta).max(dn)
            } else {
                (0.5 * delta).max(2.0 * dn)
            };
            if delta <= 1.5 * rho {
                delta = rho;
            }

            if fnew.is_finite() {
                let lag = interp.lagrange(&d);
                let improved = fnew < fopt;
                let floor = (0.1 * delta).max(rho);
                let mut best_k = None;
                let mut best_score = 0.0;
                for k in 0..interp.npt() {
                    if k == interp.opt && !improved {
                        continue;
                    }
                    let w = (interp.dist(k) / floor).powi(2).max(1.0);
                    let score = lag[k].abs() * w;
                    if score > best_score {
                        best_score = score;
                        best_k = Some(k);
                    }
                }
                if let Some(k) = best_k.filter(|_| best_score > 1e-10) {
                    interp.points[k] = xnew;
                    interp.fvals[k] = fnew;
                    if improved {
                        interp.opt = k;
                    }
                }
            }

            if ratio <= 0.1 {
                let far = far_point(&interp, (2.0 * delta).max(10.0 * rho));
                if let Some(k) = far {
                    if !move_point(&mut interp, &mut counter, k, &lo, &hi, delta, rho, penalty) {
                        return Ok(finish(&interp, counter.evals, false));
                    }
                } else if delta <= rho {
                    reduce_rho = true;
                }
            }
        }

        if reduce_rho {
            if rho <= rho_end {
                converged = true;
                break;
            }
            let r = rho / rho_end;
            let new_rho = if r <= 16.0 {
                rho_end
            } else if r <= 250.0 {
                r.sqrt() * rho_end
            } else {
                0.1 * rho
            };
            delta = (0.5 * rho).max(new_rho);
            rho = new_rho;
        }
    }
    Ok(finish(&interp, counter.evals, converged))
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] || (!v[best].is_finite() && x.is_finite()) {
            best = i;
        }
    }
    best
}

fn far_point(interp: &Interp, threshold: f64) -> Option<usize> {
    let mut best = None;
    let mut best_dist = threshold;
    for k in 0..interp.npt() {
        let d = interp.dist(k);
        if d > best_dist {
            best_dist = d;
            best = Some(k);
        }
    }
    best
}

/// Replaces point `k` by a well-poised point near the best one. Returns
/// false when the budget is exhausted.
#[allow(clippy::too_many_arguments)]
fn move_point<F: FnMut(&[f64]) -> f64>(
    interp: &mut Interp,
    counter: &mut Counter<F>,
    k: usize,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    delta: f64,
    rho: f64,
    penalty: f64,
) -> bool {
    if counter.exhausted() {
        return false;
    }
    let xopt = interp.xopt().clone();
    let radius = (0.1 * interp.dist(k)).min(delta).max(rho);
    let d = geometry_step(interp, k, &(lo - &xopt), &(hi - &xopt), radius);
    let xnew = clip(&(&xopt + d), lo, hi);
    let f = counter.call(&xnew);
    let f = if f.is_finite() { f } else { penalty.max(interp.fopt()) };
    interp.points[k] = xnew;
    interp.fvals[k] = f;
    if f < interp.fopt() {
        interp.opt = k;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_bowl() {
        let f = |x: &[f64]| x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>();
        for x0 in [[0.0, 0.0, 0.0], [1.0, 0.5, 0.9], [0.3, 1.0, 0.0]] {
            let res = minimize_dfo(f, &[0.0; 3], &[1.0; 3], &x0, &DfoOptions::default()).unwrap();
            assert!(res.converged);
            for v in &res.x {
                assert!((v - 0.3).abs() < 1e-6, "{:?}", res.x);
            }
        }
    }

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| 100.0 * (x[1] - x[0] * x[0]).powi(2) + (1.0 - x[0]).powi(2);
        let opts = DfoOptions {
            budget: 500,
            ..Default::default()
        };
        let res = minimize_dfo(f, &[-2.0, -2.0], &[2.0, 2.0], &[-1.2, 1.0], &opts).unwrap();
        assert!(res.f <= 1e-6, "{res:?}");
    }

    #[test]
    fn flat_function_returns_start() {
        let res = minimize_dfo(|_| 4.0, &[0.0, 0.0], &[1.0, 1.0], &[0.2, 0.7], &DfoOptions::default())
            .unwrap();
        assert_eq!(res.x, vec![0.2, 0.7]);
        assert!(res.converged);
    }

    #[test]
    fn minimum_on_bound() {
        let f = |x: &[f64]| (x[0] + 1.0).powi(2) + (x[1] - 0.5).powi(2);
        let res = minimize_dfo(f, &[0.0, 0.0], &[1.0, 1.0], &[0.8, 0.8], &DfoOptions::default())
            .unwrap();
        assert!(res.x[0].abs() < 1e-8 && (res.x[1] - 0.5).abs() < 1e-5, "{res:?}");
    }

    #[test]
    fn infeasible_start_is_rejected() {
        assert!(minimize_dfo(|_| 0.0, &[0.0], &[1.0], &[2.0], &DfoOptions::default()).is_err());
    }

    #[test]
    fn survives_non_finite_regions() {
        let f = |x: &[f64]| if x[0] > 0.8 { f64::NAN } else { (x[0] - 0.5).powi(2) };
        let res = minimize_dfo(f, &[0.0], &[1.0], &[0.9], &DfoOptions::default()).unwrap();
        assert!((res.x[0] - 0.5).abs() < 1e-5, "{res:?}");
    }
}
