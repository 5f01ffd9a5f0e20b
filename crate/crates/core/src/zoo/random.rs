//! Randomly generated control problems: four random state dimensions plus a
//! constant target that the first dimension should reach at the end.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::lkj::sample_lkj_cholesky;
use super::ProblemBundle;
use crate::estimator::{Binding, MatrixPath, ParamSpec};
use crate::model::{CostModel, SystemModel};

/// Number of randomly driven state dimensions; the target sits after them.
pub const DYN_DIM: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RandomProblemParams {
    /// Diagonal of the control cost, one entry per control dimension.
    pub r_vec: Vec<f64>,
    pub seed: u64,
    pub mult_noise_lo: f64,
    pub mult_noise_hi: f64,
    pub lkj_eta: f64,
    pub horizon: usize,
    /// Number of agent sensor channels.
    pub obs_dim: usize,
    /// Initial-state standard deviation of the random dimensions.
    pub init_sd: f64,
    /// Per-step noise on the target dimension.
    pub target_sd: f64,
    /// Value of the target dimension.
    pub target: f64,
}

impl Default for RandomProblemParams {
    fn default() -> Self {
        RandomProblemParams {
            r_vec: vec![1.0, 1.0],
            seed: 0,
            mult_noise_lo: 0.0,
            mult_noise_hi: 0.5,
            lkj_eta: 1.0,
            horizon: 30,
            obs_dim: DYN_DIM,
            init_sd: 0.1,
            target_sd: 1e-4,
            target: 5.0,
        }
    }
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| if hi > lo { rng.random_range(lo..hi) } else { lo })
}

/// The randomly sampled blocks of a problem, before embedding alongside the target.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomBlocks {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
}

/// Draws the random blocks; depends only on the seed and the dimensions.
pub fn sample_blocks(p: &RandomProblemParams) -> RandomBlocks {
    let n = p.r_vec.len();
    let k = p.obs_dim;
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let a = normal_matrix(&mut rng, DYN_DIM, DYN_DIM);
    let b = normal_matrix(&mut rng, DYN_DIM, n);
    let h = normal_matrix(&mut rng, k, DYN_DIM);
    let v = sample_lkj_cholesky(DYN_DIM, p.lkj_eta, &mut rng);
    let w = sample_lkj_cholesky(k, p.lkj_eta, &mut rng);
    let c = uniform_matrix(&mut rng, DYN_DIM, n, p.mult_noise_lo, p.mult_noise_hi);
    let d = uniform_matrix(&mut rng, k, DYN_DIM, p.mult_noise_lo, p.mult_noise_hi);
    RandomBlocks {
        a: a.normalize(),
        b: b.normalize(),
        h,
        v,
        w,
        c,
        d,
    }
}

/// Embeds sampled blocks into a full problem with control weights `r_vec`.
pub fn assemble(blocks: &RandomBlocks, p: &RandomProblemParams) -> ProblemBundle {
    let m = DYN_DIM + 1;
    let n = blocks.b.ncols();
    let k = blocks.h.nrows();
    let embed = |blk: &DMatrix<f64>, rows: usize, cols: usize| {
        let mut out = DMatrix::zeros(rows, cols);
        out.view_mut((0, 0), blk.shape()).copy_from(blk);
        out
    };
    let mut a = embed(&blocks.a, m, m);
    a[(DYN_DIM, DYN_DIM)] = 1.0;
    let b = embed(&blocks.b, m, n);
    let h = embed(&blocks.h, k, m);
    let mut model = SystemModel::time_invariant(a, b, h, p.horizon);
    let mut v = embed(&blocks.v, m, m);
    v[(DYN_DIM, DYN_DIM)] = p.target_sd;
    model.v_scale = v;
    model.w_scale = blocks.w.clone();
    model.c_list = vec![embed(&blocks.c, m, n)];
    model.d_list = vec![embed(&blocks.d, k, m)];
    let mut mean = DVector::zeros(m);
    mean[DYN_DIM] = p.target;
    model.init_state_mean = mean.clone();
    let mut cov = DMatrix::identity(m, m) * p.init_sd.powi(2);
    cov[(DYN_DIM, DYN_DIM)] = p.target_sd.powi(2);
    model.init_state_cov = cov;
    model.init_estimate_mean = mean;

    let mut d = DVector::zeros(m);
    d[0] = 1.0;
    d[DYN_DIM] = -1.0;
    let mut q = vec![DMatrix::zeros(m, m); p.horizon];
    q[p.horizon - 1] = &d * d.transpose();
    let r = DMatrix::from_diagonal(&DVector::from_row_slice(&p.r_vec));
    let cost = CostModel {
        q,
        r: vec![r; p.horizon],
    };

    let mut spec = ParamSpec::default();
    for (i, &ri) in p.r_vec.iter().enumerate() {
        spec.push_log(
            &format!("r{}", i + 1),
            ri,
            vec![Binding::entry(MatrixPath::R, i, i)],
        );
    }
    ProblemBundle {
        model,
        cost,
        spec,
        truth: p.r_vec.clone(),
    }
}

/// Random problem; deterministic in `p.seed`.
pub fn random_problem(p: &RandomProblemParams) -> ProblemBundle {
    assemble(&sample_blocks(p), p)
}

/// Sensitivity of the terminal error to each control channel:
/// `g_i = Σ_τ (dᵀ A^τ b_i)²` over the horizon, with `d = e_0 − e_target`.
///
/// Costs far below or above `g_i` make the agent ignore the effort term or
/// not move at all, and in both regimes `r_i` is barely identifiable.
pub fn control_authority(blocks: &RandomBlocks, horizon: usize) -> Vec<f64> {
    (0..blocks.b.ncols())
        .map(|i| {
            let mut col = blocks.b.column(i).into_owned();
            let mut g = 0.0;
            for _ in 0..horizon.saturating_sub(1) {
                g += col[0] * col[0];
                col = &blocks.a * col;
            }
            g
        })
        .collect()
}

/// Random problem whose true costs are `g_i · 10^U(−1, 1)`, with bounds
/// centred on the authority `g_i`.
pub fn random_problem_scaled(p: &RandomProblemParams) -> ProblemBundle {
    let blocks = sample_blocks(p);
    let g = control_authority(&blocks, p.horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed ^ 0x5eed_c057);
    let truth: Vec<f64> = g
        .iter()
        .map(|gi| gi * 10f64.powf(rng.random_range(-1.0..1.0)))
        .collect();
    let centred = assemble(&blocks, &RandomProblemParams { r_vec: g, ..p.clone() });
    let actual = assemble(&blocks, &RandomProblemParams { r_vec: truth.clone(), ..p.clone() });
    ProblemBundle {
        model: actual.model,
        cost: actual.cost,
        spec: centred.spec,
        truth,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_model;

    #[test]
    fn deterministic_and_valid() {
        let p = RandomProblemParams {
            seed: 11,
            ..Default::default()
        };
        let a = random_problem(&p);
        let b = random_problem(&p);
        assert_eq!(a.model, b.model);
        assert!(validate_model(&a.model, &a.cost).passed());
        let blocks = sample_blocks(&p);
        assert!((blocks.a.norm() - 1.0).abs() < 1e-12);
        assert!((blocks.b.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn authority_matches_direct_sum() {
        let p = RandomProblemParams::default();
        let blocks = sample_blocks(&p);
        let g = control_authority(&blocks, 3);
        let b0 = blocks.b[(0, 0)];
        let ab0 = (&blocks.a * blocks.b.column(0))[0];
        assert!((g[0] - (b0 * b0 + ab0 * ab0)).abs() < 1e-14);
    }

    #[test]
    fn scaled_truth_within_a_decade_of_authority() {
        for seed in 0..5 {
            let p = RandomProblemParams { seed, ..Default::default() };
            let bundle = random_problem_scaled(&p);
            let g = control_authority(&sample_blocks(&p), p.horizon);
            for (t, gi) in bundle.truth.iter().zip(&g) {
                assert!((t / gi).log10().abs() <= 1.0);
            }
            let read = bundle.spec.read(&bundle.model, &bundle.cost);
            assert!(read.iter().zip(&bundle.truth).all(|(a, b)| (a - b).abs() <= 1e-15 * b));
            assert!(validate_model(&bundle.model, &bundle.cost).passed());
        }
    }

    #[test]
    fn state_on_target_costs_nothing() {
        let bundle = random_problem(&RandomProblemParams::default());
        let x = DVector::from_vec(vec![5.0, 0.0, 0.0, 0.0, 5.0]);
        let qt = bundle.cost.q.last().unwrap();
        assert!((qt * &x).amax() == 0.0);
    }

    fn swap_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = m.clone();
        out.swap_columns(0, 1);
        out
    }

    #[test]
    fn control_channels_are_exchangeable() {
        let p = RandomProblemParams {
            r_vec: vec![0.3, 2.0],
            seed: 4,
            ..Default::default()
        };
        let blocks = sample_blocks(&p);
        let swapped_blocks = RandomBlocks {
            b: swap_columns(&blocks.b),
            c: swap_columns(&blocks.c),
            ..blocks.clone()
        };
        let swapped_p = RandomProblemParams {
            r_vec: vec![2.0, 0.3],
            ..p.clone()
        };
        let a = assemble(&blocks, &p);
        let b = assemble(&swapped_blocks, &swapped_p);
        assert_eq!(b.model.b[0], swap_columns(&a.model.b[0]));
        assert_eq!(b.model.c_list[0], swap_columns(&a.model.c_list[0]));
        assert_eq!(b.model.a, a.model.a);
        assert_eq!(b.model.v_scale, a.model.v_scale);
        assert_eq!(b.cost.r[0][(0, 0)], a.cost.r[0][(1, 1)]);
        assert_eq!(b.cost.r[0][(1, 1)], a.cost.r[0][(0, 0)]);
        let g = control_authority(&blocks, p.horizon);
        let gs = control_authority(&swapped_blocks, p.horizon);
        assert_eq!(g, vec![gs[1], gs[0]]);
    }
}
