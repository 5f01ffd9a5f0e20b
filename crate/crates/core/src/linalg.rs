//! Small dense linear-algebra helpers shared by the solver, the likelihood
//! engine and the metrics.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Tolerance on the smallest eigenvalue when checking positive semi-definiteness.
pub const PSD_TOL: f64 = -1e-10;

/// Relative jitter added to the diagonal before a single factorization retry.
pub const JITTER_REL: f64 = 1e-9;

const JITTER_FLOOR: f64 = 1e-12;

/// Returns `(S + Sᵀ) / 2`.
pub fn symmetrize(s: &DMatrix<f64>) -> DMatrix<f64> {
    (s + s.transpose()) * 0.5
}

/// In-place variant of [`symmetrize`].
pub fn symmetrize_mut(s: &mut DMatrix<f64>) {
    let n = s.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
}

/// Smallest eigenvalue of the symmetric part of `s`.
pub fn min_eigenvalue(s: &DMatrix<f64>) -> f64 {
    if s.is_empty() {
        return 0.0;
    }
    SymmetricEigen::new(symmetrize(s))
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn is_psd(s: &DMatrix<f64>) -> bool {
    s.is_square() && s.iter().all(|v| v.is_finite()) && min_eigenvalue(s) >= PSD_TOL
}

pub fn all_finite(s: &DMatrix<f64>) -> bool {
    s.iter().all(|v| v.is_finite())
}

/// `S·Sᵀ` for a noise scale factor.
pub fn outer_scale(s: &DMatrix<f64>) -> DMatrix<f64> {
    s * s.transpose()
}

fn jitter_for(s: &DMatrix<f64>) -> f64 {
    let n = s.nrows().max(1) as f64;
    let mean_diag = (s.trace() / n).abs();
    JITTER_REL * mean_diag.max(JITTER_FLOOR)
}

/// Cholesky factorization of a symmetric matrix, retried once with a
/// trace-scaled diagonal jitter when the first attempt fails.
pub fn cholesky_jitter(s: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(s.clone()) {
        return Some(c);
    }
    let mut j = s.clone();
    let eps = jitter_for(s);
    for i in 0..j.nrows() {
        j[(i, i)] += eps;
    }
    Cholesky::new(j)
}

/// Inverse of a symmetric positive-definite matrix via [`cholesky_jitter`].
pub fn spd_inverse(s: &DMatrix<f64>, what: &'static str, t: usize) -> Result<DMatrix<f64>> {
    cholesky_jitter(&symmetrize(s))
        .map(|c| c.inverse())
        .ok_or(Error::Singular { what, t })
}

/// Solves `S X = B` for symmetric positive-definite `S`.
pub fn spd_solve(
    s: &DMatrix<f64>,
    b: &DMatrix<f64>,
    what: &'static str,
    t: usize,
) -> Result<DMatrix<f64>> {
    cholesky_jitter(&symmetrize(s))
        .map(|c| c.solve(b))
        .ok_or(Error::Singular { what, t })
}

/// Log-determinant from a Cholesky factor.
pub fn chol_logdet(c: &Cholesky<f64, Dyn>) -> f64 {
    let l = c.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// Log-density of `residual` under a zero-mean Gaussian with the factored covariance.
pub fn gaussian_logpdf_chol(c: &Cholesky<f64, Dyn>, residual: &DVector<f64>) -> f64 {
    let n = residual.len() as f64;
    let mut z = residual.clone();
    c.l_dirty()
        .solve_lower_triangular_mut(&mut z);
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + chol_logdet(c) + z.norm_squared())
}

/// Log-density of `x` under `N(mean, cov)`.
pub fn gaussian_logpdf(
    x: &DVector<f64>,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    t: usize,
) -> Result<f64> {
    let c = cholesky_jitter(&symmetrize(cov)).ok_or(Error::Singular {
        what: "marginal covariance",
        t,
    })?;
    Ok(gaussian_logpdf_chol(&c, &(x - mean)))
}

/// Block-diagonal concatenation.
pub fn block_diag(blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), (b.nrows(), b.ncols())).copy_from(*b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Correctly rounded sum of a slice (Shewchuk's algorithm).
///
/// The result does not depend on the order of the inputs, so reductions
/// over parallel workers are reproducible bit for bit.
pub fn exact_sum(values: &[f64]) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    let mut special = 0.0;
    for &v in values {
        if !v.is_finite() {
            special += v;
            continue;
        }
        let mut x = v;
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        partials.truncate(i);
        partials.push(x);
    }
    if special != 0.0 || special.is_nan() {
        return special;
    }
    // Round the expansion to nearest, handling the half-way case.
    let mut n = partials.len();
    if n == 0 {
        return 0.0;
    }
    n -= 1;
    let mut hi = partials[n];
    let mut lo = 0.0;
    while n > 0 {
        let x = hi;
        n -= 1;
        let y = partials[n];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    if n > 0 && ((lo < 0.0 && partials[n - 1] < 0.0) || (lo > 0.0 && partials[n - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        let yr = x - hi;
        if y == yr {
            hi = x;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_sum_is_order_independent() {
        let v = vec![1e16, 1.0, -1e16, 3.5, 1e-3, -7.25e10, 7.25e10];
        let mut w = v.clone();
        w.reverse();
        assert_eq!(exact_sum(&v), exact_sum(&w));
        assert_eq!(exact_sum(&v), 4.501);
        assert_eq!(exact_sum(&[0.1; 10]), 1.0);
    }

    #[test]
    fn logpdf_matches_scalar_formula() {
        let cov = DMatrix::from_element(1, 1, 2.0);
        let x = DVector::from_element(1, 1.0);
        let mean = DVector::zeros(1);
        let lp = gaussian_logpdf(&x, &mean, &cov, 0).unwrap();
        let expected = -0.5 * (2.0 * std::f64::consts::PI * 2.0).ln() - 0.25;
        assert!((lp - expected).abs() < 1e-14);
    }

    #[test]
    fn jitter_rescues_rank_deficient_matrix() {
        let mut s = DMatrix::zeros(2, 2);
        s[(0, 0)] = 1.0;
        assert!(Cholesky::new(s.clone()).is_none());
        assert!(cholesky_jitter(&s).is_some());
    }

    #[test]
    fn symmetrize_is_idempotent() {
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 3.0]);
        let once = symmetrize(&s);
        assert_eq!(once, symmetrize(&once));
    }
}
