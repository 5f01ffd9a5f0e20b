//! Cholesky factors of LKJ-distributed correlation matrices (onion method).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, StandardNormal};

/// Draws the lower Cholesky factor of a `dim`×`dim` correlation matrix with
/// density proportional to `det(Ω)^(eta − 1)`.
pub fn sample_lkj_cholesky<R: Rng + ?Sized>(dim: usize, eta: f64, rng: &mut R) -> DMatrix<f64> {
    assert!(dim >= 1 && eta > 0.0, "LKJ needs dim >= 1 and eta > 0");
    let mut l = DMatrix::zeros(dim, dim);
    l[(0, 0)] = 1.0;
    let base = eta + 0.5 * (dim as f64 - 2.0);
    for i in 1..dim {
        let j = (i - 1) as f64;
        let y = Beta::new(0.5 * j + 0.5, base - 0.5 * j)
            .expect("valid beta parameters")
            .sample(rng);
        let mut u = DVector::from_fn(i, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = u.norm();
        if norm > 0.0 {
            u /= norm;
        }
        let w = u * y.sqrt();
        for c in 0..i {
            l[(i, c)] = w[c];
        }
        l[(i, i)] = (1.0 - y).max(0.0).sqrt();
    }
    l
}
