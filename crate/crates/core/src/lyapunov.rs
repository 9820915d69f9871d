//! Dense solvers for
//!
//! ```text
//! A X + X Aᵀ + Σ N_i X N_iᵀ + Q = 0
//! ```
//!
//! The standard equation (no `N_i`) is solved by Bartels–Stewart
//! back-substitution on the real Schur form of `A`. The generalized equation
//! is solved by the stationary iteration
//! `X_{j+1} = L_A⁻¹(Q + Σ N_i X_j N_iᵀ)` started from zero, which contracts
//! whenever the delay couplings are small relative to the decay of `A`.
//! A Kronecker-product direct solve is kept for cross-checking small
//! instances.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{frobenius, kron, symmetrize, EPS};

/// Spectra with `max Re λ ≥ −STABILITY_MARGIN` are rejected.
pub const STABILITY_MARGIN: f64 = 1e-12;
/// Largest dimension accepted by [`solve_kronecker`].
pub const KRONECKER_MAX_DIM: usize = 30;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LyapunovError {
    #[error("coefficient matrix is not stable (max Re λ = {abscissa:e})")]
    NotStable { abscissa: f64 },
    #[error("real Schur reduction failed to converge")]
    SolverBreakdown,
    #[error("stationary iteration did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("Kronecker solve limited to d <= {KRONECKER_MAX_DIM}, got {0}")]
    TooLarge(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveMethod {
    SchurDirect,
    StationaryIteration,
    KroneckerDirect,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LyapunovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSolution {
    pub x: DMatrix<f64>,
    /// Recomputed with [`lyapunov_residual`] after the solve.
    pub rel_residual: f64,
    pub iterations: usize,
    pub method: SolveMethod,
}

/// `‖A X + X Aᵀ + Σ N_i X N_iᵀ + Q‖_F / max(1, ‖Q‖_F)`.
pub fn lyapunov_residual(
    a: &DMatrix<f64>,
    ns: &[DMatrix<f64>],
    q: &DMatrix<f64>,
    x: &DMatrix<f64>,
) -> Result<f64, LyapunovError> {
    let d = a.nrows();
    if a.ncols() != d || q.shape() != (d, d) || x.shape() != (d, d) {
        return Err(LyapunovError::DimensionMismatch("A, Q and X must be square of equal size"));
    }
    if ns.iter().any(|n| n.shape() != (d, d)) {
        return Err(LyapunovError::DimensionMismatch("delay matrices must match A"));
    }
    let ax = a * x;
    let mut r = &ax + ax.transpose() + q;
    for n in ns {
        r += n * x * n.transpose();
    }
    Ok(frobenius(&r) / frobenius(q).max(1.0))
}

/// Real Schur factorization of `A` prepared for repeated solves of
/// `A X + X Aᵀ + Q = 0` with different right-hand sides.
#[derive(Debug, Clone)]
pub struct SchurLyapunov {
    u: DMatrix<f64>,
    t: DMatrix<f64>,
    blocks: Vec<(usize, usize)>,
}

impl SchurLyapunov {
    pub fn new(a: &DMatrix<f64>) -> Result<Self, LyapunovError> {
        let d = a.nrows();
        if a.ncols() != d {
            return Err(LyapunovError::DimensionMismatch("A must be square"));
        }
        let (u, t) = a
            .clone()
            .try_schur(EPS, 10_000 * d.max(1))
            .ok_or(LyapunovError::SolverBreakdown)?
            .unpack();
        let abscissa = crate::linalg::quasi_triangular_abscissa(&t);
        if !(abscissa < -STABILITY_MARGIN) {
            return Err(LyapunovError::NotStable { abscissa });
        }
        let mut blocks = Vec::new();
        let mut i = 0;
        while i < d {
            let size = if i + 1 < d && t[(i + 1, i)] != 0.0 { 2 } else { 1 };
            blocks.push((i, size));
            i += size;
        }
        Ok(Self { u, t, blocks })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    /// Solves `A X + X Aᵀ + Q = 0`, returning the symmetrized `X`.
    pub fn solve(&self, q: &DMatrix<f64>) -> Result<DMatrix<f64>, LyapunovError> {
        let f = -(self.u.transpose() * q * &self.u);
        let y = self.solve_quasi_triangular(&f)?;
        Ok(symmetrize(&(&self.u * y * self.u.transpose())))
    }

    /// `T Y + Y Tᵀ = F` by column-block back-substitution.
    fn solve_quasi_triangular(&self, f: &DMatrix<f64>) -> Result<DMatrix<f64>, LyapunovError> {
        let d = self.dim();
        let t = &self.t;
        let mut y = DMatrix::<f64>::zeros(d, d);
        for &(j0, js) in self.blocks.iter().rev() {
            let tail = j0 + js;
            let mut g = f.columns(j0, js).into_owned();
            if tail < d {
                g -= y.columns(tail, d - tail) * t.view((j0, tail), (js, d - tail)).transpose();
            }
            let tjj = t.view((j0, j0), (js, js)).into_owned();
            for &(i0, is) in self.blocks.iter().rev() {
                let itail = i0 + is;
                let mut rhs = g.rows(i0, is).into_owned();
                if itail < d {
                    rhs -= t.view((i0, itail), (is, d - itail)) * y.view((itail, j0), (d - itail, js));
                }
                let tii = t.view((i0, i0), (is, is)).into_owned();
                let z = small_sylvester(&tii, &tjj, &rhs)?;
                y.view_mut((i0, j0), (is, js)).copy_from(&z);
            }
        }
        Ok(y)
    }
}

/// `T_ii Z + Z T_jjᵀ = R` for blocks of size ≤ 2.
fn small_sylvester(
    tii: &DMatrix<f64>,
    tjj: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
) -> Result<DMatrix<f64>, LyapunovError> {
    let (is, js) = rhs.shape();
    if is == 1 && js == 1 {
        let denom = tii[(0, 0)] + tjj[(0, 0)];
        if denom == 0.0 {
            return Err(LyapunovError::SolverBreakdown);
        }
        return Ok(DMatrix::from_element(1, 1, rhs[(0, 0)] / denom));
    }
    let op = kron(&DMatrix::identity(js, js), tii) + kron(tjj, &DMatrix::identity(is, is));
    let v = DVector::from_column_slice(rhs.as_slice());
    let sol = op.lu().solve(&v).ok_or(LyapunovError::SolverBreakdown)?;
    Ok(DMatrix::from_column_slice(is, js, sol.as_slice()))
}

fn check_square(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<(), LyapunovError> {
    let d = a.nrows();
    if a.ncols() != d || q.shape() != (d, d) {
        return Err(LyapunovError::DimensionMismatch("A and Q must be square of equal size"));
    }
    Ok(())
}

/// Solves `A X + X Aᵀ + Q = 0`.
pub fn solve_standard(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<LyapunovSolution, LyapunovError> {
    check_square(a, q)?;
    let solver = SchurLyapunov::new(a)?;
    let mut x = solver.solve(q)?;
    let mut rel_residual = lyapunov_residual(a, &[], q, &x)?;
    let mut iterations = 1;
    // one step of iterative refinement on the residual
    if rel_residual > 1e-12 {
        let ax = a * &x;
        let r = &ax + ax.transpose() + q;
        let refined = &x + solver.solve(&r)?;
        let refined_residual = lyapunov_residual(a, &[], q, &refined)?;
        if refined_residual < rel_residual {
            x = refined;
            rel_residual = refined_residual;
            iterations += 1;
        }
    }
    Ok(LyapunovSolution {
        x,
        rel_residual,
        iterations,
        method: SolveMethod::SchurDirect,
    })
}

/// Iterates `X_{j+1} = L_A⁻¹(Q + Σ N_i X_j N_iᵀ)` from `X_0 = 0`.
pub struct PicardIteration<'a> {
    solver: SchurLyapunov,
    ns: &'a [DMatrix<f64>],
    q: &'a DMatrix<f64>,
    x: DMatrix<f64>,
    steps: usize,
}

impl<'a> PicardIteration<'a> {
    pub fn new(
        a: &DMatrix<f64>,
        ns: &'a [DMatrix<f64>],
        q: &'a DMatrix<f64>,
    ) -> Result<Self, LyapunovError> {
        check_square(a, q)?;
        if ns.iter().any(|n| n.shape() != a.shape()) {
            return Err(LyapunovError::DimensionMismatch("delay matrices must match A"));
        }
        let solver = SchurLyapunov::new(a)?;
        let d = a.nrows();
        Ok(Self {
            solver,
            ns,
            q,
            x: DMatrix::zeros(d, d),
            steps: 0,
        })
    }

    pub fn current(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn advance(&mut self) -> Result<&DMatrix<f64>, LyapunovError> {
        let mut rhs = self.q.clone();
        for n in self.ns {
            rhs += n * &self.x * n.transpose();
        }
        self.x = self.solver.solve(&rhs)?;
        self.steps += 1;
        Ok(&self.x)
    }
}

/// Solves `A X + X Aᵀ + Σ N_i X N_iᵀ + Q = 0` by stationary iteration.
pub fn solve_generalized(
    a: &DMatrix<f64>,
    ns: &[DMatrix<f64>],
    q: &DMatrix<f64>,
    opts: &LyapunovOptions,
) -> Result<LyapunovSolution, LyapunovError> {
    let active: Vec<DMatrix<f64>> = ns.iter().filter(|n| n.iter().any(|v| *v != 0.0)).cloned().collect();
    if active.is_empty() {
        check_square(a, q)?;
        if ns.iter().any(|n| n.shape() != a.shape()) {
            return Err(LyapunovError::DimensionMismatch("delay matrices must match A"));
        }
        return solve_standard(a, q);
    }
    let mut iter = PicardIteration::new(a, &active, q)?;
    let mut prev_step = f64::INFINITY;
    let mut growth_streak = 0usize;
    let mut residual = f64::INFINITY;
    while iter.steps() < opts.max_iter {
        let before = iter.current().clone();
        let x = iter.advance()?;
        residual = lyapunov_residual(a, &active, q, x)?;
        if residual <= opts.tol {
            return Ok(LyapunovSolution {
                x: x.clone(),
                rel_residual: residual,
                iterations: iter.steps(),
                method: SolveMethod::StationaryIteration,
            });
        }
        let step = frobenius(&(x - before));
        if !step.is_finite() || !residual.is_finite() {
            break;
        }
        // increments that stop shrinking mean the map is not a contraction
        if iter.steps() > 2 && step >= prev_step {
            growth_streak += 1;
        } else {
            growth_streak = 0;
        }
        if growth_streak >= 10 {
            break;
        }
        prev_step = step;
    }
    Err(LyapunovError::NoConvergence {
        iterations: iter.steps(),
        residual,
    })
}

/// Direct solve of `(I⊗A + A⊗I + Σ N_i⊗N_i) vec X = −vec Q` (d ≤ 30).
pub fn solve_kronecker(
    a: &DMatrix<f64>,
    ns: &[DMatrix<f64>],
    q: &DMatrix<f64>,
) -> Result<LyapunovSolution, LyapunovError> {
    check_square(a, q)?;
    let d = a.nrows();
    if d > KRONECKER_MAX_DIM {
        return Err(LyapunovError::TooLarge(d));
    }
    if ns.iter().any(|n| n.shape() != (d, d)) {
        return Err(LyapunovError::DimensionMismatch("delay matrices must match A"));
    }
    let ident = DMatrix::<f64>::identity(d, d);
    let mut op = kron(&ident, a) + kron(a, &ident);
    for n in ns {
        op += kron(n, n);
    }
    let rhs = -DVector::from_column_slice(q.as_slice());
    let sol = op.lu().solve(&rhs).ok_or(LyapunovError::SolverBreakdown)?;
    let x = symmetrize(&DMatrix::from_column_slice(d, d, sol.as_slice()));
    let rel_residual = lyapunov_residual(a, ns, q, &x)?;
    Ok(LyapunovSolution {
        x,
        rel_residual,
        iterations: 1,
        method: SolveMethod::KroneckerDirect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn scalar_standard() {
        let sol = solve_standard(&scalar(-1.0), &scalar(2.0)).unwrap();
        assert_relative_eq!(sol.x[(0, 0)], 1.0, epsilon = 1e-15);
        assert!(sol.rel_residual <= 1e-15);
    }

    #[test]
    fn diagonal_standard() {
        let a = -DMatrix::<f64>::identity(2, 2);
        let sol = solve_standard(&a, &DMatrix::identity(2, 2)).unwrap();
        assert_relative_eq!(sol.x, DMatrix::identity(2, 2) * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn complex_pair_block() {
        // eigenvalues −0.5 ± i·√3/2 produce a 2×2 Schur block
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, -1.0, -1.0, 0.3, 0.0, 0.0, -2.0]);
        let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.1, 0.0, 0.1, 3.0]);
        let sol = solve_standard(&a, &q).unwrap();
        assert!(sol.rel_residual <= 1e-13, "{}", sol.rel_residual);
        let oracle = solve_kronecker(&a, &[], &q).unwrap();
        assert_relative_eq!(sol.x, oracle.x, epsilon = 1e-12);
    }

    #[test]
    fn unstable_is_rejected() {
        let err = solve_standard(&scalar(0.0), &scalar(1.0)).unwrap_err();
        assert!(matches!(err, LyapunovError::NotStable { .. }));
        let err = solve_standard(&scalar(-1e-13), &scalar(1.0)).unwrap_err();
        assert!(matches!(err, LyapunovError::NotStable { .. }));
    }

    #[test]
    fn scalar_generalized() {
        let sol = solve_generalized(&scalar(-1.0), &[scalar(0.5)], &scalar(1.0), &LyapunovOptions::default()).unwrap();
        assert_relative_eq!(sol.x[(0, 0)], 4.0 / 7.0, epsilon = 1e-10);
        assert_eq!(sol.method, SolveMethod::StationaryIteration);
    }

    #[test]
    fn zero_couplings_fall_back_to_standard() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.4, 0.0, -3.0]);
        let q = DMatrix::identity(2, 2);
        let g = solve_generalized(&a, &[DMatrix::zeros(2, 2)], &q, &LyapunovOptions::default()).unwrap();
        let s = solve_standard(&a, &q).unwrap();
        assert_relative_eq!(g.x, s.x, epsilon = 1e-12);
    }

    #[test]
    fn divergent_iteration_reports_no_convergence() {
        // −2X + 4X + 1 = 0 has the negative solution −1/2; Picard diverges
        let err = solve_generalized(&scalar(-1.0), &[scalar(2.0)], &scalar(1.0), &LyapunovOptions::default()).unwrap_err();
        assert!(matches!(err, LyapunovError::NoConvergence { .. }));
    }

    #[test]
    fn residual_normalization() {
        let a = DMatrix::<f64>::identity(3, 3) * -1.0;
        let r = lyapunov_residual(&a, &[], &DMatrix::identity(3, 3), &DMatrix::zeros(3, 3)).unwrap();
        assert_relative_eq!(r, 1.0, epsilon = 1e-15);
        let exact = lyapunov_residual(&scalar(-1.0), &[scalar(0.5)], &scalar(1.0), &scalar(4.0 / 7.0)).unwrap();
        assert!(exact <= 1e-15);
        assert!(lyapunov_residual(&a, &[], &DMatrix::identity(2, 2), &DMatrix::zeros(3, 3)).is_err());
    }

    #[test]
    fn residual_grows_linearly_under_perturbation() {
        // derivative of the residual along X + εI is ‖A + Aᵀ + Σ N Nᵀ‖_F / max(1, ‖Q‖_F)
        let a = DMatrix::from_row_slice(2, 2, &[-2.0, 0.5, 0.1, -1.0]);
        let n = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.1, 0.3]);
        let q = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 2.0]);
        let ns = [n.clone()];
        let sol = solve_kronecker(&a, &ns, &q).unwrap();
        let eps = 1e-6;
        let r1 = lyapunov_residual(&a, &ns, &q, &(&sol.x + DMatrix::identity(2, 2) * eps)).unwrap();
        let r2 = lyapunov_residual(&a, &ns, &q, &(&sol.x + DMatrix::identity(2, 2) * (2.0 * eps))).unwrap();
        let slope = frobenius(&(&a + a.transpose() + &n * n.transpose())) / frobenius(&q).max(1.0);
        assert_relative_eq!(r1 / eps, slope, max_relative = 1e-6);
        assert_relative_eq!(r2 / r1, 2.0, max_relative = 1e-6);
    }

    #[test]
    fn kronecker_rejects_large() {
        let a = -DMatrix::<f64>::identity(31, 31);
        assert!(matches!(
            solve_kronecker(&a, &[], &a.clone()),
            Err(LyapunovError::TooLarge(31))
        ));
    }
}
