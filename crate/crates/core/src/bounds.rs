//! A-priori output error bounds and the signal norms they consume.
//!
//! Deterministic and bilinear delay systems (zero history, `‖v‖_{L²} ≤ 1`):
//!
//! ```text
//! ‖Δy‖_{L²} ≤ 4 ‖ΔH‖_TC ( ‖φ₀‖ max{1, ‖v‖_∞} + max{‖u‖_{L²}, ‖v‖_{L¹}} ‖u‖_∞ )
//! ```
//!
//! The uncontrolled delay system on `[0, T₀]` is the bilinear one with
//! `v ≡ T₀^{-1/2}` and delay matrices scaled by `√T₀`. Stochastic delay
//! systems driven by independent Wiener processes satisfy
//! `‖Δy‖ ≤ ‖ΔH‖_TC (‖ξ‖ + 2‖u‖)`.
//!
//! Every report lists the hypotheses behind its bound. A failed hypothesis
//! does not stop the evaluation; it only clears [`BoundReport::certified`].

use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DVector;
use num_traits::Float;
use thiserror::Error;

use crate::sim::Grid;
use crate::sysmodel::SignalSpec;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("{0} must be nonnegative and finite")]
    NegativeInput(&'static str),
    #[error("horizon T0 must be positive, got {0}")]
    InvalidHorizon(f64),
    #[error("grid has no steps")]
    EmptyGrid,
    #[error("signal does not fit the grid: {0}")]
    BadSignal(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
    pub l2_or_inf: f64,
    pub horizon: f64,
}

impl SignalNorms {
    pub fn zero(horizon: f64) -> Self {
        Self {
            l1: 0.0,
            l2: 0.0,
            linf: 0.0,
            l2_or_inf: 0.0,
            horizon,
        }
    }

    /// Norms of a constant scalar `c` on `[0, T]`, computed in closed form.
    pub fn constant(c: f64, horizon: f64) -> Self {
        let c = c.abs();
        let l2 = c * horizon.sqrt();
        Self {
            l1: c * horizon,
            l2,
            linf: c,
            l2_or_inf: l2.max(c),
            horizon,
        }
    }
}

/// Rectangle-rule norms over the integrator nodes `t_j = j·dt`,
/// `j = 0..steps`, with the Euclidean norm at each node.
pub fn signal_norms(u: &SignalSpec, grid: &Grid) -> Result<SignalNorms, BoundError> {
    if grid.steps == 0 {
        return Err(BoundError::EmptyGrid);
    }
    u.check(grid.steps).map_err(BoundError::BadSignal)?;
    let mut value = DVector::zeros(u.dim());
    let (mut sum1, mut sum2, mut max) = (0.0, 0.0, 0.0f64);
    for j in 0..grid.steps {
        u.write_value(j, grid.time(j), &mut value);
        let n = value.norm();
        sum1 += n;
        sum2 += n * n;
        max = max.max(n);
    }
    let l2 = (grid.dt * sum2).sqrt();
    Ok(SignalNorms {
        l1: grid.dt * sum1,
        l2,
        linf: max,
        l2_or_inf: l2.max(max),
        horizon: grid.horizon(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption {
    pub name: &'static str,
    pub satisfied: bool,
    /// Not checkable from the data; taken on trust.
    pub assumed: bool,
    /// Positive when satisfied with room to spare; NaN when not evaluated.
    pub margin: f64,
}

impl Assumption {
    pub fn strict_less(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            satisfied: value < limit,
            assumed: false,
            margin: limit - value,
        }
    }

    pub fn at_most(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            satisfied: value <= limit,
            assumed: false,
            margin: limit - value,
        }
    }

    pub fn assumed(name: &'static str) -> Self {
        Self {
            name,
            satisfied: true,
            assumed: true,
            margin: f64::NAN,
        }
    }

    pub fn unevaluated(name: &'static str) -> Self {
        Self {
            name,
            satisfied: false,
            assumed: false,
            margin: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub trace_norm: f64,
    pub bound_value: f64,
    pub components: Vec<(&'static str, f64)>,
    pub assumptions: Vec<Assumption>,
}

impl BoundReport {
    fn from_components(trace_norm: f64, components: Vec<(&'static str, f64)>, assumptions: Vec<Assumption>) -> Self {
        let bound_value = components.iter().map(|(_, v)| v).sum();
        Self {
            trace_norm,
            bound_value,
            components,
            assumptions,
        }
    }

    pub fn certified(&self) -> bool {
        self.assumptions.iter().all(|a| a.satisfied)
    }

    pub fn push_assumption(&mut self, a: Assumption) {
        self.assumptions.push(a);
    }
}

fn nonneg(name: &'static str, v: f64) -> Result<(), BoundError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(BoundError::NegativeInput(name))
    }
}

fn check_norms(prefix: [&'static str; 3], n: &SignalNorms) -> Result<(), BoundError> {
    nonneg(prefix[0], n.l1)?;
    nonneg(prefix[1], n.l2)?;
    nonneg(prefix[2], n.linf)
}

fn contraction_assumption(name: &'static str, q: Option<f64>) -> Assumption {
    match q {
        Some(q) => Assumption::strict_less(name, q, 1.0),
        None => Assumption::unevaluated(name),
    }
}

/// Bound for bilinear delay systems. `volterra_q` is `M Σ‖N_i‖ / √(2ω)`
/// taken over both systems (see [`crate::stability`]).
pub fn bound_bilinear_delay(
    trace_norm: f64,
    phi0_norm: f64,
    u: &SignalNorms,
    v: &SignalNorms,
    volterra_q: Option<f64>,
) -> Result<BoundReport, BoundError> {
    nonneg("trace_norm", trace_norm)?;
    nonneg("phi0_norm", phi0_norm)?;
    check_norms(["u.l1", "u.l2", "u.linf"], u)?;
    check_norms(["v.l1", "v.l2", "v.linf"], v)?;
    let initial = 4.0 * trace_norm * phi0_norm * v.linf.max(1.0);
    let forced = 4.0 * trace_norm * u.l2.max(v.l1) * u.linf;
    let assumptions = alloc::vec![
        contraction_assumption("volterra_contraction", volterra_q),
        Assumption::at_most("v_l2_at_most_one", v.l2, 1.0),
        Assumption::assumed("controls_in_h1"),
        Assumption::assumed("zero_history"),
    ];
    Ok(BoundReport::from_components(
        trace_norm,
        alloc::vec![("initial_state", initial), ("control", forced)],
        assumptions,
    ))
}

/// Bound for the uncontrolled delay system on `[0, T₀]`. The trace norm must
/// belong to the systems with delay matrices scaled by `√T₀`, and
/// `volterra_q` must be evaluated for those scaled matrices.
pub fn bound_uncontrolled_delay(
    trace_norm: f64,
    phi0_norm: f64,
    u: &SignalNorms,
    t0: f64,
    volterra_q: Option<f64>,
) -> Result<BoundReport, BoundError> {
    if !(t0 > 0.0) || !t0.is_finite() {
        return Err(BoundError::InvalidHorizon(t0));
    }
    nonneg("trace_norm", trace_norm)?;
    nonneg("phi0_norm", phi0_norm)?;
    check_norms(["u.l1", "u.l2", "u.linf"], u)?;
    let initial = 4.0 * trace_norm * phi0_norm * t0.powf(-0.5).max(1.0);
    let forced = 4.0 * trace_norm * u.l2.max(t0.sqrt()) * u.linf;
    let assumptions = alloc::vec![
        contraction_assumption("volterra_contraction_scaled", volterra_q),
        Assumption::assumed("zero_history"),
    ];
    Ok(BoundReport::from_components(
        trace_norm,
        alloc::vec![("initial_state", initial), ("control", forced)],
        assumptions,
    ))
}

/// Bound for stochastic delay systems with deterministic controls, for which
/// the `L^∞_ω L²_t` norm reduces to the `L²` norm.
pub fn bound_sdde(
    trace_norm: f64,
    xi_norm: f64,
    u_norm: f64,
    volterra_q: Option<f64>,
) -> Result<BoundReport, BoundError> {
    nonneg("trace_norm", trace_norm)?;
    nonneg("xi_norm", xi_norm)?;
    nonneg("u_norm", u_norm)?;
    let assumptions = alloc::vec![
        contraction_assumption("volterra_contraction", volterra_q),
        Assumption::assumed("zero_history"),
        Assumption::assumed("independent_wiener_processes"),
    ];
    Ok(BoundReport::from_components(
        trace_norm,
        alloc::vec![("initial_state", trace_norm * xi_norm), ("control", 2.0 * trace_norm * u_norm)],
        assumptions,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn norms(l1: f64, l2: f64, linf: f64) -> SignalNorms {
        SignalNorms {
            l1,
            l2,
            linf,
            l2_or_inf: l2.max(linf),
            horizon: 1.0,
        }
    }

    #[test]
    fn constant_and_zero_signals() {
        let grid = Grid::new(0.01, 300).unwrap();
        let n = signal_norms(&SignalSpec::Constant(DVector::from_element(1, 1.0)), &grid).unwrap();
        assert_relative_eq!(n.l1, 3.0, epsilon = 1e-12);
        assert_relative_eq!(n.l2, 3f64.sqrt(), epsilon = 1e-12);
        assert_eq!(n.linf, 1.0);
        assert_eq!(n.l2_or_inf, n.l2.max(n.linf));
        let z = signal_norms(&SignalSpec::Zero { dim: 2 }, &grid).unwrap();
        assert_eq!((z.l1, z.l2, z.linf), (0.0, 0.0, 0.0));
    }

    #[test]
    fn sine_l2_matches_analytic_integral() {
        let grid = Grid::new(0.01, 200).unwrap();
        let n = signal_norms(&SignalSpec::SineAllOnes { freq: 20.0, dim: 1 }, &grid).unwrap();
        let t: f64 = 2.0;
        let exact = (t / 2.0 - (40.0 * t).sin() / 80.0).sqrt();
        assert!((n.l2 - exact).abs() <= 0.02 * exact, "{} vs {}", n.l2, exact);
        assert!((n.l2 - 1.0).abs() <= 0.02);
    }

    #[test]
    fn empty_grid_is_an_error() {
        let grid = Grid { dt: 0.1, steps: 0 };
        assert_eq!(signal_norms(&SignalSpec::Zero { dim: 1 }, &grid), Err(BoundError::EmptyGrid));
    }

    #[test]
    fn bilinear_hand_evaluation() {
        let r = bound_bilinear_delay(0.1, 1.0, &norms(0.0, 2.0, 1.0), &norms(1.0, 0.5, 0.5), Some(0.5)).unwrap();
        assert_relative_eq!(r.bound_value, 1.2, epsilon = 1e-15);
        assert_eq!(r.bound_value, r.components.iter().map(|c| c.1).sum::<f64>());
        assert!(r.certified());
        let r0 = bound_bilinear_delay(0.0, 1.0, &norms(0.0, 2.0, 1.0), &norms(1.0, 0.5, 0.5), Some(0.5)).unwrap();
        assert_eq!(r0.bound_value, 0.0);
        let quiet = bound_bilinear_delay(0.3, 0.0, &norms(0.0, 0.0, 0.0), &norms(1.0, 0.5, 0.5), Some(0.5)).unwrap();
        assert_eq!(quiet.bound_value, 0.0);
    }

    #[test]
    fn failed_hypothesis_still_evaluates() {
        let r = bound_bilinear_delay(0.1, 1.0, &norms(0.0, 2.0, 1.0), &norms(3.0, 1.5, 1.0), Some(1.0)).unwrap();
        assert!(!r.certified());
        assert!(r.bound_value > 0.0);
        assert_eq!(r.assumptions.len(), 4);
        let r = bound_sdde(0.1, 1.0, 1.0, None).unwrap();
        assert!(!r.certified());
    }

    #[test]
    fn uncontrolled_hand_evaluation() {
        let r = bound_uncontrolled_delay(0.05, 2.0, &norms(0.0, 1.0, 3.0), 4.0, Some(0.2)).unwrap();
        assert_relative_eq!(r.bound_value, 1.6, epsilon = 1e-15);
        let r = bound_uncontrolled_delay(1.0, 1.0, &SignalNorms::zero(0.25), 0.25, Some(0.2)).unwrap();
        assert_relative_eq!(r.bound_value, 8.0, epsilon = 1e-15);
        assert_eq!(
            bound_uncontrolled_delay(1.0, 1.0, &SignalNorms::zero(1.0), 0.0, None),
            Err(BoundError::InvalidHorizon(0.0))
        );
    }

    #[test]
    fn unit_horizon_matches_bilinear_form() {
        let u = norms(0.4, 0.7, 1.3);
        let a = bound_uncontrolled_delay(0.2, 1.5, &u, 1.0, Some(0.1)).unwrap();
        let b = bound_bilinear_delay(0.2, 1.5, &u, &SignalNorms::constant(1.0, 1.0), Some(0.1)).unwrap();
        assert_relative_eq!(a.bound_value, b.bound_value, epsilon = 1e-15);
    }

    #[test]
    fn sdde_hand_evaluation() {
        let r = bound_sdde(0.2, 1.0, 0.5, Some(0.3)).unwrap();
        assert_relative_eq!(r.bound_value, 0.4, epsilon = 1e-15);
        assert_eq!(bound_sdde(0.2, 0.0, 0.0, Some(0.3)).unwrap().bound_value, 0.0);
        assert_eq!(bound_sdde(0.0, 1.0, 1.0, Some(0.3)).unwrap().bound_value, 0.0);
        assert_eq!(bound_sdde(-0.1, 1.0, 1.0, None), Err(BoundError::NegativeInput("trace_norm")));
    }
}
