use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sdnioc::zoo::sample_lkj_cholesky;

/// Kolmogorov–Smirnov distance between a sample on (0, 1) and a CDF.
fn ks_distance(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Off-diagonal correlations mapped to (0, 1), one vector per entry.
fn correlations(dim: usize, eta: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![Vec::with_capacity(n); dim * (dim - 1) / 2];
    for _ in 0..n {
        let l = sample_lkj_cholesky(dim, eta, &mut rng);
        let omega = &l * l.transpose();
        for i in 0..dim {
            assert!((omega[(i, i)] - 1.0).abs() < 1e-12);
        }
        let mut k = 0;
        for i in 0..dim {
            for j in 0..i {
                out[k].push(0.5 * (omega[(i, j)] + 1.0));
                k += 1;
            }
        }
    }
    out
}

const N: usize = 20_000;

fn critical() -> f64 {
    1.95 / (N as f64).sqrt()
}

#[test]
fn uniform_lkj_in_four_dimensions_has_beta_2_2_marginals() {
    for (k, xs) in correlations(4, 1.0, N, 1).into_iter().enumerate() {
        let d = ks_distance(xs, |x| 3.0 * x * x - 2.0 * x.powi(3));
        assert!(d < critical(), "entry {k}: KS {d}");
    }
}

#[test]
fn concentrated_lkj_in_two_dimensions_has_beta_3_3_marginal() {
    let xs = correlations(2, 3.0, N, 2).remove(0);
    let d = ks_distance(xs, |x| 10.0 * x.powi(3) - 15.0 * x.powi(4) + 6.0 * x.powi(5));
    assert!(d < critical(), "KS {d}");
}

#[test]
fn wrong_marginal_is_rejected() {
    let xs = correlations(2, 3.0, N, 3).remove(0);
    let d = ks_distance(xs, |x| 3.0 * x * x - 2.0 * x.powi(3));
    assert!(d > critical(), "KS {d}");
}
