#![allow(dead_code)]

use delaybt_core::linalg::spectral_abscissa;
use delaybt_core::rng;
use delaybt_core::stability;
use delaybt_core::{DMatrix, DelaySystem, DelayTerm, SystemKind};

/// Random system with `max Re λ(A) = −1` and delay matrices scaled so that
/// the contraction factor equals `q`.
pub fn random_stable(seed: u64, d: usize, terms: usize, q: f64, kind: SystemKind) -> DelaySystem {
    let mut s = rng::stream(seed, 42, 0);
    let g = rng::gaussian_matrix(&mut s, d, d, 1.0 / (d as f64).sqrt());
    let shift = spectral_abscissa(&g).unwrap() + 1.0;
    let a = g - DMatrix::identity(d, d) * shift;
    let raw: Vec<DMatrix<f64>> = (0..terms).map(|_| rng::gaussian_matrix(&mut s, d, d, 1.0)).collect();
    let b = rng::gaussian_matrix(&mut s, d, 2, 1.0);
    let b_in = rng::gaussian_matrix(&mut s, d, 1, 1.0);
    let c = rng::gaussian_matrix(&mut s, 2, d, 1.0);
    let env = stability::semigroup_envelope(&a).unwrap();
    let q_raw = stability::check_volterra(env.m, env.omega, &raw).q;
    let delays = raw
        .into_iter()
        .enumerate()
        .map(|(i, n)| DelayTerm::new(n * (q / q_raw), 0.1 * (i + 1) as f64))
        .collect();
    DelaySystem::new(a, delays, b, b_in, c, kind)
}

pub fn rel_frobenius(x: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    (x - reference).norm() / reference.norm().max(f64::MIN_POSITIVE)
}

/// Random well-conditioned invertible matrix.
pub fn random_similarity(seed: u64, d: usize) -> DMatrix<f64> {
    let mut s = rng::stream(seed, 43, 0);
    DMatrix::identity(d, d) + rng::gaussian_matrix(&mut s, d, d, 0.3 / (d as f64).sqrt())
}

pub fn transform(sys: &DelaySystem, s: &DMatrix<f64>) -> DelaySystem {
    let s_inv = s.clone().try_inverse().unwrap();
    DelaySystem {
        a: s * &sys.a * &s_inv,
        delays: sys
            .delays
            .iter()
            .map(|t| DelayTerm::new(s * &t.matrix * &s_inv, t.tau))
            .collect(),
        b: s * &sys.b,
        b_in: s * &sys.b_in,
        c: &sys.c * &s_inv,
        kind: sys.kind,
    }
}

pub struct InvarianceResiduals {
    /// Largest normalized inclusion residual.
    pub inclusion: f64,
    /// Largest `‖C φ(t_j)‖` of the homogeneous run (kernel case only).
    pub output: f64,
}

fn block_system(seed: u64, lower: bool) -> DelaySystem {
    // 3 + 2 split; the zero block decouples the second group from the first
    let mut s = rng::stream(seed, 44, 0);
    let d = 5;
    let mut a = rng::gaussian_matrix(&mut s, d, d, 0.3) - DMatrix::identity(d, d) * 2.0;
    let mut n = rng::gaussian_matrix(&mut s, d, d, 0.15);
    let mut b = rng::gaussian_matrix(&mut s, d, 2, 1.0);
    let mut b_in = rng::gaussian_matrix(&mut s, d, 1, 1.0);
    let mut c = rng::gaussian_matrix(&mut s, 2, d, 1.0);
    if lower {
        a.view_mut((0, 3), (3, 2)).fill(0.0);
        n.view_mut((0, 3), (3, 2)).fill(0.0);
        c.view_mut((0, 3), (2, 2)).fill(0.0);
    } else {
        a.view_mut((3, 0), (2, 3)).fill(0.0);
        n.view_mut((3, 0), (2, 3)).fill(0.0);
        b.view_mut((3, 0), (2, 2)).fill(0.0);
        b_in.view_mut((3, 0), (2, 1)).fill(0.0);
    }
    let sys = DelaySystem::new(a, vec![DelayTerm::new(n, 0.1)], b, b_in, c, SystemKind::DeterministicDelay);
    transform(&sys, &random_similarity(seed + 1000, d))
}

/// Eigenvectors of a PSD matrix split at `1e-10 · λ_max`: (kernel, range).
fn split_psd(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (vals, vecs) = delaybt_core::linalg::sym_eigen_sorted(m);
    let max = vals.iter().copied().fold(0.0, f64::max);
    let k = vals.iter().filter(|v| **v <= 1e-10 * max).count();
    (vecs.columns(0, k).into_owned(), vecs.columns(k, m.nrows() - k).into_owned())
}

fn norm2(m: &DMatrix<f64>) -> f64 {
    delaybt_core::linalg::spectral_norm(m)
}

/// Unobservable states stay unobservable: `𝒪x = 0` implies `Cx = 0`,
/// `𝒪Ax = 0`, `𝒪Nx = 0`, and the homogeneous output from `x` vanishes.
pub fn kernel_invariance(seed: u64) -> InvarianceResiduals {
    use delaybt_core::balance::compute_gramians;
    use delaybt_core::sim::{simulate_dde, Grid};
    use delaybt_core::{GramianVariant, HistorySpec, InitialState, LyapunovOptions, SignalSpec};

    let sys = block_system(seed, true);
    let gram = compute_gramians(&sys, GramianVariant::BilinearRule, &LyapunovOptions::default()).unwrap();
    let o = &gram.obs;
    let (kernel, _) = split_psd(o);
    assert_eq!(kernel.ncols(), 2, "constructed kernel has dimension 2");
    let n = &sys.delays[0].matrix;
    let mut inclusion = 0.0f64;
    let mut output = 0.0f64;
    let grid = Grid::new(0.01, 300).unwrap();
    for j in 0..kernel.ncols() {
        let x = kernel.column(j).into_owned();
        inclusion = inclusion
            .max((&sys.c * &x).norm() / norm2(&sys.c))
            .max((o * &sys.a * &x).norm() / (norm2(o) * norm2(&sys.a)))
            .max((o * n * &x).norm() / (norm2(o) * norm2(n)));
        let traj = simulate_dde(
            &sys,
            &SignalSpec::Zero { dim: sys.dim_input() },
            &InitialState::Explicit(x),
            &HistorySpec::Zero,
            &grid,
        )
        .unwrap();
        let y = &traj.outputs[0];
        for r in 0..y.nrows() {
            output = output.max(y.row(r).norm());
        }
    }
    InvarianceResiduals { inclusion, output }
}

/// The reachable space is invariant: `A` and `N` map range(𝒫) into itself
/// and the columns of `B`, `B_in` lie in it.
pub fn range_invariance(seed: u64, variant: delaybt_core::GramianVariant) -> InvarianceResiduals {
    use delaybt_core::balance::compute_gramians;
    use delaybt_core::LyapunovOptions;

    let sys = block_system(seed, false);
    let gram = compute_gramians(&sys, variant, &LyapunovOptions::default()).unwrap();
    let (kernel, range) = split_psd(&gram.reach);
    assert_eq!(kernel.ncols(), 2, "constructed unreachable space has dimension 2");
    let proj = &kernel * kernel.transpose();
    let n = &sys.delays[0].matrix;
    let inclusion = (norm2(&(&proj * &sys.a * &range)) / norm2(&sys.a))
        .max(norm2(&(&proj * n * &range)) / norm2(n))
        .max(norm2(&(&proj * &sys.b)) / norm2(&sys.b))
        .max(norm2(&(&proj * &sys.b_in)) / norm2(&sys.b_in));
    InvarianceResiduals { inclusion, output: 0.0 }
}
