//! Stability hypotheses behind the error bounds.
//!
//! * semigroup envelope `‖e^{tA}‖ ≤ M e^{−ωt}` (sampled estimate),
//! * Volterra contraction `q = M Σ‖N_i‖ / √(2ω) < 1`,
//! * decay of the delayed semigroup `M e^{ατ} Σ‖N_i‖ / (ω − α) < 1`,
//! * mean-square stability of `dX = A X dt + Σ (A_i X + N_i X(t−τ)) dW_i`
//!   from a Lyapunov matrix `G ≻ 0` plus a delay smallness condition.

use alloc::vec::Vec;

use nalgebra::DMatrix;
use num_traits::Float;
use thiserror::Error;

use crate::linalg::{expm, spectral_abscissa, spectral_norm, sym_eigen_sorted};
use crate::lyapunov::{solve_generalized, LyapunovOptions, STABILITY_MARGIN};

/// Fraction of the spectral abscissa kept as decay rate.
pub const OMEGA_SAFETY: f64 = 1e-3;
pub const ENVELOPE_SAMPLES: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StabilityError {
    #[error("matrix is not stable (max Re λ = {0:e})")]
    NotStable(f64),
    #[error("eigenvalue computation failed")]
    Breakdown,
    #[error("alpha = {alpha} must lie in [0, omega = {omega})")]
    AlphaOutOfRange { alpha: f64, omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub m: f64,
    pub omega: f64,
    /// `M` comes from sampling `‖e^{tA}‖ e^{ωt}`, not a rigorous bound.
    pub sampled: bool,
}

impl Envelope {
    /// Envelope valid for two systems at once: larger `M`, smaller `ω`.
    pub fn combine(&self, other: &Envelope) -> Envelope {
        Envelope {
            m: self.m.max(other.m),
            omega: self.omega.min(other.omega),
            sampled: self.sampled || other.sampled,
        }
    }
}

pub fn semigroup_envelope(a: &DMatrix<f64>) -> Result<Envelope, StabilityError> {
    let abscissa = spectral_abscissa(a).ok_or(StabilityError::Breakdown)?;
    if !(abscissa < -STABILITY_MARGIN) {
        return Err(StabilityError::NotStable(abscissa));
    }
    let omega = (1.0 - OMEGA_SAFETY) * (-abscissa);
    let t_max = 10.0 / omega;
    let t_min = t_max * 1e-4;
    let ratio = (t_max / t_min).ln() / (ENVELOPE_SAMPLES - 1) as f64;
    let mut m = 1.0f64;
    for i in 0..ENVELOPE_SAMPLES {
        let t = t_min * (ratio * i as f64).exp();
        let val = spectral_norm(&expm(&(a * t))) * (omega * t).exp();
        m = m.max(val);
    }
    Ok(Envelope { m, omega, sampled: true })
}

pub fn coupling_norm(ns: &[DMatrix<f64>]) -> f64 {
    ns.iter().map(spectral_norm).sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VolterraCheck {
    pub q: f64,
    pub ok: bool,
}

/// `q = M Σ‖N_i‖₂ / √(2ω)`; passes only for `q < 1`.
pub fn check_volterra(m: f64, omega: f64, ns: &[DMatrix<f64>]) -> VolterraCheck {
    let q = m * coupling_norm(ns) / (2.0 * omega).sqrt();
    VolterraCheck { q, ok: q < 1.0 }
}

/// `M e^{ατ} Σ‖N_i‖₂ / (ω − α) < 1`.
pub fn check_delay_decay(
    m: f64,
    omega: f64,
    alpha: f64,
    tau: f64,
    ns: &[DMatrix<f64>],
) -> Result<bool, StabilityError> {
    if !(alpha >= 0.0 && alpha < omega) {
        return Err(StabilityError::AlphaOutOfRange { alpha, omega });
    }
    let lhs = m * (alpha * tau).exp() * coupling_norm(ns) / (omega - alpha);
    Ok(lhs < 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SddeMsRecord {
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
    pub tau_max: f64,
    pub g_norm: f64,
    pub lyap_ok: bool,
    pub pass: bool,
}

/// δ-quantities and the admissible delay for `Q = I` (`λ_min(Q) = 1`).
/// Returns `(δ₁, δ₂, δ₃, τ_max)`; `δ₃ = τ_max = ∞` when all `N_i` vanish.
pub fn sdde_delay_limits(
    a_norm: f64,
    g_norm: f64,
    a_norms: &[f64],
    n_norms: &[f64],
) -> (f64, f64, f64, f64) {
    let sum_n2: f64 = n_norms.iter().map(|n| n * n).sum();
    let delta1: f64 = a_norms.iter().map(|a| a * a).sum::<f64>() + sum_n2;
    let delta2 = 2.0 * g_norm * (2.0 * delta1 * sum_n2).sqrt();
    if sum_n2 == 0.0 {
        return (delta1, delta2, f64::INFINITY, f64::INFINITY);
    }
    // both square-root differences are rationalized to avoid cancellation:
    // (√(δ₂² + 4λgS) − δ₂)/(2gS) = 2λ/(√(δ₂² + 4λgS) + δ₂), and likewise for τ_max
    let lambda_min_q = 1.0;
    let delta3 = (2.0 * lambda_min_q / ((delta2 * delta2 + 4.0 * lambda_min_q * g_norm * sum_n2).sqrt() + delta2)).powi(2);
    let a2 = a_norm * a_norm;
    let tau_max = if a2 == 0.0 {
        delta3 / (4.0 * delta1)
    } else {
        delta3 / (2.0 * ((delta1 * delta1 + delta3 * a2).sqrt() + delta1))
    };
    (delta1, delta2, delta3, tau_max)
}

/// Solves `G A + Aᵀ G + Σ (A_i + N_i)ᵀ G (A_i + N_i) = −I` and evaluates the
/// delay smallness condition. Solver failures come back as `lyap_ok = false`.
pub fn check_sdde_ms_stability(
    a: &DMatrix<f64>,
    a_terms: &[DMatrix<f64>],
    n_terms: &[DMatrix<f64>],
    tau: f64,
) -> SddeMsRecord {
    let d = a.nrows();
    let zero = DMatrix::zeros(d, d);
    let count = a_terms.len().max(n_terms.len());
    let mut couplings = Vec::with_capacity(count);
    let mut a_norms = Vec::with_capacity(count);
    let mut n_norms = Vec::with_capacity(count);
    for i in 0..count {
        let ai = a_terms.get(i).unwrap_or(&zero);
        let ni = n_terms.get(i).unwrap_or(&zero);
        couplings.push((ai + ni).transpose());
        a_norms.push(spectral_norm(ai));
        n_norms.push(spectral_norm(ni));
    }
    let ident = DMatrix::<f64>::identity(d, d);
    let solved = solve_generalized(&a.transpose(), &couplings, &ident, &LyapunovOptions::default());
    let (g_norm, lyap_ok) = match solved {
        Ok(sol) => {
            let (vals, _) = sym_eigen_sorted(&sol.x);
            let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
            (spectral_norm(&sol.x), min > 0.0)
        }
        Err(_) => (f64::NAN, false),
    };
    let (delta1, delta2, delta3, tau_max) = if lyap_ok {
        sdde_delay_limits(spectral_norm(a), g_norm, &a_norms, &n_norms)
    } else {
        (f64::NAN, f64::NAN, f64::NAN, f64::NAN)
    };
    SddeMsRecord {
        delta1,
        delta2,
        delta3,
        tau_max,
        g_norm,
        lyap_ok,
        pass: lyap_ok && tau < tau_max,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn normal_matrices_have_unit_envelope() {
        let env = semigroup_envelope(&(DMatrix::<f64>::identity(4, 4) * -1.2)).unwrap();
        assert!((env.m - 1.0).abs() <= 1e-6);
        assert_relative_eq!(env.omega, 1.2 * 0.999, epsilon = 1e-12);
        let env = semigroup_envelope(&DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, -3.0])).unwrap();
        assert!((env.m - 1.0).abs() <= 1e-6);
        assert_relative_eq!(env.omega, 0.999, epsilon = 1e-12);
    }

    #[test]
    fn jordan_block_has_overshoot() {
        let env = semigroup_envelope(&DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 0.0, -1.0])).unwrap();
        assert!(env.m > 1.0);
        assert!(semigroup_envelope(&scalar(0.5)).is_err());
    }

    #[test]
    fn volterra_arithmetic() {
        let c = check_volterra(1.0, 1.2 * 0.999, &[DMatrix::identity(3, 3)]);
        assert_relative_eq!(c.q, 1.0 / (2.0 * 1.1988f64).sqrt(), epsilon = 1e-12);
        assert!(c.ok);
        assert_eq!(check_volterra(1.0, 1.0, &[DMatrix::zeros(2, 2)]).q, 0.0);
        let edge = check_volterra(1.0, 0.5, &[scalar(1.0)]);
        assert_eq!(edge.q, 1.0);
        assert!(!edge.ok);
    }

    #[test]
    fn delay_decay_arithmetic() {
        assert!(check_delay_decay(1.0, 1.2, 0.0, 0.1, &[scalar(1.0)]).unwrap());
        assert!(check_delay_decay(1.0, 1.2, 0.0, 0.1, &[scalar(0.0)]).unwrap());
        assert!(!check_delay_decay(1.0, 1.0, 0.0, 0.1, &[scalar(1.0)]).unwrap());
        assert!(check_delay_decay(1.0, 1.0, 1.0, 0.1, &[scalar(1.0)]).is_err());
    }

    #[test]
    fn scalar_ms_lyapunov_matrix() {
        let rec = check_sdde_ms_stability(&scalar(-1.0), &[scalar(0.0)], &[scalar(0.1)], 0.01);
        assert!(rec.lyap_ok);
        assert_relative_eq!(rec.g_norm, 1.0 / 1.99, epsilon = 1e-10);
        assert_relative_eq!(rec.delta1, 0.01, epsilon = 1e-15);
    }

    #[test]
    fn zero_couplings_pass_for_any_delay() {
        let a = DMatrix::from_row_slice(2, 2, &[-1.0, 0.3, 0.0, -2.0]);
        let rec = check_sdde_ms_stability(&a, &[DMatrix::zeros(2, 2)], &[DMatrix::zeros(2, 2)], 1e6);
        assert!(rec.lyap_ok && rec.pass);
        assert!(rec.tau_max.is_infinite());
        let unstable = check_sdde_ms_stability(&scalar(0.2), &[], &[scalar(0.1)], 0.1);
        assert!(!unstable.lyap_ok && !unstable.pass);
    }
}
