//! Gramians, square-root balancing, truncation and the error-system Hankel
//! spectrum.
//!
//! Reachability and observability Gramians solve
//!
//! ```text
//! A 𝒫 + 𝒫 Aᵀ + Σ N_i 𝒫 N_iᵀ + B Bᵀ + B_in B_inᵀ = 0      (bilinear rule)
//! Aᵀ 𝒪 + 𝒪 A + Σ N_iᵀ 𝒪 N_i + Cᵀ C = 0
//! ```
//!
//! The stochastic rule instead solves `A X + X Aᵀ + Σ N_i X N_iᵀ + B Bᵀ = 0`
//! and sets `𝒫 = X + B_in B_inᵀ`. With factors `𝒪 = WᵀW`, `𝒫 = RRᵀ` and the
//! SVD `W R = V Σ Uᵀ`, the balancing transform is `Q = Σ^{-1/2} Vᵀ W` with
//! right inverse `Q⁻¹ = R U Σ^{-1/2}`.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;
use thiserror::Error;

use crate::linalg::{block_diag, frobenius, hstack, sym_eigen_sorted, vstack, EPS};
use crate::lyapunov::{solve_generalized, LyapunovError, LyapunovOptions};
use crate::sysmodel::{DelaySystem, DelayTerm};

/// Relative singular-value gap below which truncation is flagged.
pub const GAP_WARNING: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BalanceError {
    #[error("reachability Gramian: {0}")]
    Reachability(LyapunovError),
    #[error("observability Gramian: {0}")]
    Observability(LyapunovError),
    #[error("matrix is indefinite (min eigenvalue {min_eig:e}, max {max_eig:e})")]
    IndefiniteMatrix { min_eig: f64, max_eig: f64 },
    #[error("Gramian product has rank zero")]
    RankCollapse,
    #[error("truncation order {r} outside 1..={r0}")]
    OrderOutOfRange { r: usize, r0: usize },
    #[error("delay structures differ: {0}")]
    DelayMismatch(&'static str),
    #[error("input/output dimensions differ: {0}")]
    IoMismatch(&'static str),
    #[error("system is malformed: {0}")]
    InvalidSystem(alloc::string::String),
}

impl BalanceError {
    pub fn lyapunov(&self) -> Option<&LyapunovError> {
        match self {
            BalanceError::Reachability(e) | BalanceError::Observability(e) => Some(e),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GramianVariant {
    BilinearRule,
    SddeRule,
}

impl GramianVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            GramianVariant::BilinearRule => "bilinear",
            GramianVariant::SddeRule => "sdde",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramianPair {
    pub reach: DMatrix<f64>,
    pub obs: DMatrix<f64>,
    pub variant: GramianVariant,
    /// Relative residuals of the reachability and observability solves.
    pub residuals: (f64, f64),
    pub iterations: (usize, usize),
}

fn ensure_valid(sys: &DelaySystem) -> Result<(), BalanceError> {
    let report = sys.validate();
    match report.violations.first() {
        None => Ok(()),
        Some(v) => Err(BalanceError::InvalidSystem(alloc::format!("{}", v))),
    }
}

pub fn compute_gramians(
    sys: &DelaySystem,
    variant: GramianVariant,
    opts: &LyapunovOptions,
) -> Result<GramianPair, BalanceError> {
    ensure_valid(sys)?;
    let ns = sys.delay_matrices();
    let bbt = &sys.b * sys.b.transpose();
    let binbint = &sys.b_in * sys.b_in.transpose();
    let (reach, reach_res, reach_it) = match variant {
        GramianVariant::BilinearRule => {
            let sol = solve_generalized(&sys.a, &ns, &(&bbt + &binbint), opts)
                .map_err(BalanceError::Reachability)?;
            (sol.x, sol.rel_residual, sol.iterations)
        }
        GramianVariant::SddeRule => {
            let sol = solve_generalized(&sys.a, &ns, &bbt, opts).map_err(BalanceError::Reachability)?;
            (sol.x + binbint, sol.rel_residual, sol.iterations)
        }
    };
    let at = sys.a.transpose();
    let nts: Vec<DMatrix<f64>> = ns.iter().map(|n| n.transpose()).collect();
    let ctc = sys.c.transpose() * &sys.c;
    let obs = solve_generalized(&at, &nts, &ctc, opts).map_err(BalanceError::Observability)?;
    Ok(GramianPair {
        reach,
        obs: obs.x,
        variant,
        residuals: (reach_res, obs.rel_residual),
        iterations: (reach_it, obs.iterations),
    })
}

/// `‖𝒫_bil − 𝒫_sdde‖_F / max(1, ‖𝒫_bil‖_F)`; zero whenever all `N_i` vanish.
pub fn variant_discrepancy(sys: &DelaySystem, opts: &LyapunovOptions) -> Result<f64, BalanceError> {
    let bil = compute_gramians(sys, GramianVariant::BilinearRule, opts)?;
    let sdde = compute_gramians(sys, GramianVariant::SddeRule, opts)?;
    Ok(frobenius(&(&bil.reach - &sdde.reach)) / frobenius(&bil.reach).max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// `M = R Rᵀ`, matrix is `d × r₀`.
    Right,
    /// `M = Wᵀ W`, matrix is `r₀ × d`.
    Left,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub matrix: DMatrix<f64>,
    pub kind: FactorKind,
}

impl Factor {
    pub fn rank(&self) -> usize {
        match self.kind {
            FactorKind::Right => self.matrix.ncols(),
            FactorKind::Left => self.matrix.nrows(),
        }
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        match self.kind {
            FactorKind::Right => &self.matrix * self.matrix.transpose(),
            FactorKind::Left => self.matrix.transpose() * &self.matrix,
        }
    }
}

/// Eigendecomposition-based factor keeping eigenvalues above
/// `rank_tol · λ_max` (default `d · ε`).
pub fn psd_factor(m: &DMatrix<f64>, rank_tol: Option<f64>, kind: FactorKind) -> Result<Factor, BalanceError> {
    let d = m.nrows();
    let rank_tol = rank_tol.unwrap_or(d as f64 * EPS);
    let (vals, vecs) = sym_eigen_sorted(m);
    let max_eig = vals.iter().copied().fold(0.0, f64::max);
    let min_eig = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if d > 0 && min_eig < -10.0 * rank_tol * max_eig {
        return Err(BalanceError::IndefiniteMatrix { min_eig, max_eig });
    }
    let kept: Vec<usize> = (0..d).rev().filter(|&i| vals[i] > rank_tol * max_eig && vals[i] > 0.0).collect();
    let mut r = DMatrix::zeros(d, kept.len());
    for (col, &i) in kept.iter().enumerate() {
        r.set_column(col, &(vecs.column(i) * vals[i].sqrt()));
    }
    let matrix = match kind {
        FactorKind::Right => r,
        FactorKind::Left => r.transpose(),
    };
    Ok(Factor { matrix, kind })
}

/// Singular values of `W R` (sorted nonincreasing) with left/right vectors.
struct ProductSvd {
    v: DMatrix<f64>,
    sigma: Vec<f64>,
    u: DMatrix<f64>,
}

fn product_svd(w: &DMatrix<f64>, r: &DMatrix<f64>) -> ProductSvd {
    let prod = w * r;
    let (rows, cols) = prod.shape();
    if rows == 0 || cols == 0 {
        return ProductSvd {
            v: DMatrix::zeros(rows, 0),
            sigma: Vec::new(),
            u: DMatrix::zeros(cols, 0),
        };
    }
    let svd = prod.svd(true, true);
    let left = svd.u.expect("requested U");
    let right_t = svd.v_t.expect("requested Vᵀ");
    let s = svd.singular_values;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let mut v = DMatrix::zeros(rows, order.len());
    let mut u = DMatrix::zeros(cols, order.len());
    for (dst, &src) in order.iter().enumerate() {
        v.set_column(dst, &left.column(src));
        u.set_column(dst, &right_t.row(src).transpose());
    }
    ProductSvd {
        v,
        sigma: order.iter().map(|&i| s[i].max(0.0)).collect(),
        u,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalancedRealization {
    /// `r₀ × d`
    pub q: DMatrix<f64>,
    /// `d × r₀`, `Q · Q⁻¹ = I`
    pub q_inv: DMatrix<f64>,
    pub hsv: Vec<f64>,
    pub system: DelaySystem,
}

impl BalancedRealization {
    pub fn rank(&self) -> usize {
        self.hsv.len()
    }
}

pub fn balance_transform(sys: &DelaySystem, gram: &GramianPair) -> Result<BalancedRealization, BalanceError> {
    ensure_valid(sys)?;
    let r = psd_factor(&gram.reach, None, FactorKind::Right)?.matrix;
    let w = psd_factor(&gram.obs, None, FactorKind::Left)?.matrix;
    let svd = product_svd(&w, &r);
    let sigma1 = svd.sigma.first().copied().unwrap_or(0.0);
    let cutoff = sys.dim_state() as f64 * EPS * sigma1;
    let r0 = svd.sigma.iter().take_while(|&&s| s > cutoff && s > 0.0).count();
    if r0 == 0 {
        return Err(BalanceError::RankCollapse);
    }
    let hsv: Vec<f64> = svd.sigma[..r0].to_vec();
    let mut q = svd.v.columns(0, r0).transpose() * &w;
    let mut q_inv = &r * svd.u.columns(0, r0);
    for (i, &s) in hsv.iter().enumerate() {
        let scale = 1.0 / s.sqrt();
        q.row_mut(i).scale_mut(scale);
        q_inv.column_mut(i).scale_mut(scale);
    }
    let system = DelaySystem {
        a: &q * &sys.a * &q_inv,
        delays: sys
            .delays
            .iter()
            .map(|t| DelayTerm::new(&q * &t.matrix * &q_inv, t.tau))
            .collect(),
        b: &q * &sys.b,
        b_in: &q * &sys.b_in,
        c: &sys.c * &q_inv,
        kind: sys.kind,
    };
    Ok(BalancedRealization { q, q_inv, hsv, system })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub system: DelaySystem,
    /// Leading `r` rows of `Q`.
    pub projection: DMatrix<f64>,
    /// Leading `r` columns of `Q⁻¹`.
    pub lift: DMatrix<f64>,
    pub hsv_tail: Vec<f64>,
    /// `σ_r − σ_{r+1} < 10⁻⁸ σ₁`: the retained subspace is not well defined.
    pub near_degenerate_gap: bool,
}

impl ReducedModel {
    pub fn order(&self) -> usize {
        self.system.dim_state()
    }

    pub fn tail_sum(&self) -> f64 {
        self.hsv_tail.iter().sum()
    }
}

/// Keeps the leading `r` balanced states; delays are carried over unchanged.
pub fn truncate(bal: &BalancedRealization, r: usize) -> Result<ReducedModel, BalanceError> {
    let r0 = bal.rank();
    if r == 0 || r > r0 {
        return Err(BalanceError::OrderOutOfRange { r, r0 });
    }
    let s = &bal.system;
    let system = DelaySystem {
        a: s.a.view((0, 0), (r, r)).into_owned(),
        delays: s
            .delays
            .iter()
            .map(|t| DelayTerm::new(t.matrix.view((0, 0), (r, r)).into_owned(), t.tau))
            .collect(),
        b: s.b.rows(0, r).into_owned(),
        b_in: s.b_in.rows(0, r).into_owned(),
        c: s.c.columns(0, r).into_owned(),
        kind: s.kind,
    };
    let near_degenerate_gap = r < r0 && bal.hsv[r - 1] - bal.hsv[r] < GAP_WARNING * bal.hsv[0];
    Ok(ReducedModel {
        system,
        projection: bal.q.rows(0, r).into_owned(),
        lift: bal.q_inv.columns(0, r).into_owned(),
        hsv_tail: bal.hsv[r..].to_vec(),
        near_degenerate_gap,
    })
}

/// Block composition with `Â = diag(A, Ã)`, `N̂_i = diag(N_i, Ñ_i)`, stacked
/// `B̂`, `B̂_in` and `Ĉ = (C, −C̃)`. Delay terms are paired by equal `τ`.
pub fn build_error_system(sys1: &DelaySystem, sys2: &DelaySystem) -> Result<DelaySystem, BalanceError> {
    ensure_valid(sys1)?;
    ensure_valid(sys2)?;
    if sys1.dim_input() != sys2.dim_input() {
        return Err(BalanceError::IoMismatch("input dimensions"));
    }
    if sys1.dim_initial() != sys2.dim_initial() {
        return Err(BalanceError::IoMismatch("initial-state dimensions"));
    }
    if sys1.dim_output() != sys2.dim_output() {
        return Err(BalanceError::IoMismatch("output dimensions"));
    }
    if sys1.delays.len() != sys2.delays.len() {
        return Err(BalanceError::DelayMismatch("different number of delay terms"));
    }
    let mut delays = Vec::with_capacity(sys1.delays.len());
    for term in &sys1.delays {
        let partner = sys2
            .delays
            .iter()
            .find(|t| t.tau == term.tau)
            .ok_or(BalanceError::DelayMismatch("no delay term with matching tau"))?;
        delays.push(DelayTerm::new(block_diag(&term.matrix, &partner.matrix), term.tau));
    }
    Ok(DelaySystem {
        a: block_diag(&sys1.a, &sys2.a),
        delays,
        b: vstack(&sys1.b, &sys2.b),
        b_in: vstack(&sys1.b_in, &sys2.b_in),
        c: hstack(&sys1.c, &(-&sys2.c)),
        kind: sys1.kind,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HankelSpectrum {
    pub values: Vec<f64>,
    pub trace_norm: f64,
}

impl HankelSpectrum {
    pub fn from_values(mut values: Vec<f64>) -> Self {
        values.sort_by(|a, b| b.total_cmp(a));
        let trace_norm = values.iter().sum();
        Self { values, trace_norm }
    }
}

/// Hankel singular values of a single system (all singular values of `W R`).
pub fn hankel_spectrum(sys: &DelaySystem, variant: GramianVariant, opts: &LyapunovOptions) -> Result<HankelSpectrum, BalanceError> {
    let gram = compute_gramians(sys, variant, opts)?;
    spectrum_of(&gram)
}

fn spectrum_of(gram: &GramianPair) -> Result<HankelSpectrum, BalanceError> {
    let r = psd_factor(&gram.reach, None, FactorKind::Right)?.matrix;
    let w = psd_factor(&gram.obs, None, FactorKind::Left)?.matrix;
    Ok(HankelSpectrum::from_values(product_svd(&w, &r).sigma))
}

/// Singular values of the error system; their sum is the trace norm of the
/// Hankel-operator difference.
pub fn error_hankel(
    sys1: &DelaySystem,
    sys2: &DelaySystem,
    variant: GramianVariant,
    opts: &LyapunovOptions,
) -> Result<HankelSpectrum, BalanceError> {
    let err = build_error_system(sys1, sys2)?;
    hankel_spectrum(&err, variant, opts)
}
