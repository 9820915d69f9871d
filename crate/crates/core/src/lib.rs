//! Structure-preserving balanced truncation for linear time-invariant delay
//! systems.
//!
//! Three system classes share one representation ([`DelaySystem`]):
//!
//! ```text
//! deterministic:  x'(t) = A x(t) + Σ N_i x(t − τ_i)        + B u(t)
//! bilinear:       x'(t) = A x(t) + Σ N_i x(t − τ_i) v(t)   + B u(t)
//! stochastic:     dX    = (A X + B u) dt + Σ N_i X(t − τ_i) dW_i
//! ```
//!
//! with output `y = C x` and admissible initial states `x(0) = B_in w`.
//!
//! The reduction pipeline is: [`balance::compute_gramians`] (generalized
//! Lyapunov equations) → [`balance::balance_transform`] (square-root
//! balancing) → [`balance::truncate`]. The a-priori output error bounds in
//! [`bounds`] consume the trace norm returned by [`balance::error_hankel`],
//! and [`stability`] checks the hypotheses those bounds rest on.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and
//! parallel Monte-Carlo execution live in the `delaybt` companion crate.

#![no_std]
// Whenever std ends up linked (tests, std-enabled dependents) its inherent
// float methods shadow the libm-backed `Float` trait imports.
#![allow(unused_imports)]
// `!(x < y)` guards are meant to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod balance;
pub mod bench;
pub mod bounds;
pub mod linalg;
pub mod lyapunov;
pub mod rng;
pub mod sim;
pub mod stability;
pub mod sysmodel;

pub use balance::{BalancedRealization, GramianPair, GramianVariant, HankelSpectrum, ReducedModel};
pub use bounds::{BoundReport, SignalNorms};
pub use lyapunov::{LyapunovError, LyapunovOptions, LyapunovSolution};
pub use sim::{Grid, NoiseMode, TrajectoryEnsemble};
pub use sysmodel::{DelaySystem, DelayTerm, HistorySpec, InitialState, SignalSpec, SystemKind};

pub use nalgebra::{DMatrix, DVector};
