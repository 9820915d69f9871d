//! System representation shared by the full, reduced and error systems.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SystemKind {
    DeterministicDelay,
    BilinearDelay,
    StochasticDelay,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::DeterministicDelay => "DeterministicDelay",
            SystemKind::BilinearDelay => "BilinearDelay",
            SystemKind::StochasticDelay => "StochasticDelay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "DeterministicDelay" => Some(SystemKind::DeterministicDelay),
            "BilinearDelay" => Some(SystemKind::BilinearDelay),
            "StochasticDelay" => Some(SystemKind::StochasticDelay),
            _ => None,
        }
    }
}

impl fmt::Display for SystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One delayed coupling `N x(t − τ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayTerm {
    pub matrix: DMatrix<f64>,
    pub tau: f64,
}

impl DelayTerm {
    pub fn new(matrix: DMatrix<f64>, tau: f64) -> Self {
        Self { matrix, tau }
    }
}

/// `(A, {N_i, τ_i}, B, B_in, C)` plus the class of dynamics.
///
/// `B` is `d × n`, `B_in` is `d × k` (its columns span the admissible
/// initial states) and `C` is `m × d`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySystem {
    pub a: DMatrix<f64>,
    pub delays: Vec<DelayTerm>,
    pub b: DMatrix<f64>,
    pub b_in: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub kind: SystemKind,
}

impl DelaySystem {
    pub fn new(
        a: DMatrix<f64>,
        delays: Vec<DelayTerm>,
        b: DMatrix<f64>,
        b_in: DMatrix<f64>,
        c: DMatrix<f64>,
        kind: SystemKind,
    ) -> Self {
        Self {
            a,
            delays,
            b,
            b_in,
            c,
            kind,
        }
    }

    pub fn dim_state(&self) -> usize {
        self.a.nrows()
    }

    pub fn dim_input(&self) -> usize {
        self.b.ncols()
    }

    pub fn dim_initial(&self) -> usize {
        self.b_in.ncols()
    }

    pub fn dim_output(&self) -> usize {
        self.c.nrows()
    }

    pub fn delay_matrices(&self) -> Vec<DMatrix<f64>> {
        self.delays.iter().map(|t| t.matrix.clone()).collect()
    }

    pub fn max_delay(&self) -> f64 {
        self.delays.iter().map(|t| t.tau).fold(0.0, f64::max)
    }

    pub fn with_kind(mut self, kind: SystemKind) -> Self {
        self.kind = kind;
        self
    }

    /// Same system with every delay matrix multiplied by `factor`.
    pub fn scale_delays(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for term in &mut out.delays {
            term.matrix *= factor;
        }
        out
    }

    pub fn validate(&self) -> ValidationReport {
        validate_system(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ViolationCode {
    EmptyState,
    DimensionMismatch,
    NonPositiveDelay,
    DuplicateDelay,
    NonFinite,
}

impl ViolationCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ViolationCode::EmptyState => "empty state",
            ViolationCode::DimensionMismatch => "dimension mismatch",
            ViolationCode::NonPositiveDelay => "non-positive delay",
            ViolationCode::DuplicateDelay => "duplicate delay",
            ViolationCode::NonFinite => "non-finite entry",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub code: ViolationCode,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code.as_str(), self.detail)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, code: ViolationCode) -> bool {
        self.violations.iter().any(|v| v.code == code)
    }

    fn push(&mut self, code: ViolationCode, detail: String) {
        self.violations.push(Violation { code, detail });
    }
}

/// Collects every invariant violation; never fails.
pub fn validate_system(sys: &DelaySystem) -> ValidationReport {
    let mut report = ValidationReport::default();
    let d = sys.a.nrows();
    if d == 0 {
        report.push(ViolationCode::EmptyState, "state dimension is zero".into());
    }
    if sys.a.ncols() != d {
        report.push(
            ViolationCode::DimensionMismatch,
            format!("A is {}x{}, expected square", d, sys.a.ncols()),
        );
    }
    let mut check_rows = |name: &str, m: &DMatrix<f64>| {
        if m.nrows() != d {
            report.push(
                ViolationCode::DimensionMismatch,
                format!("{} has {} rows, expected {}", name, m.nrows(), d),
            );
        }
    };
    check_rows("B", &sys.b);
    check_rows("B_in", &sys.b_in);
    if sys.c.ncols() != d {
        report.push(
            ViolationCode::DimensionMismatch,
            format!("C has {} columns, expected {}", sys.c.ncols(), d),
        );
    }
    for (i, term) in sys.delays.iter().enumerate() {
        if term.matrix.shape() != (d, d) {
            report.push(
                ViolationCode::DimensionMismatch,
                format!(
                    "N_{} is {}x{}, expected {}x{}",
                    i + 1,
                    term.matrix.nrows(),
                    term.matrix.ncols(),
                    d,
                    d
                ),
            );
        }
        if !(term.tau > 0.0) || !term.tau.is_finite() {
            report.push(
                ViolationCode::NonPositiveDelay,
                format!("tau_{} = {}", i + 1, term.tau),
            );
        }
        for (j, other) in sys.delays.iter().enumerate().skip(i + 1) {
            if term.tau == other.tau {
                report.push(
                    ViolationCode::DuplicateDelay,
                    format!("tau_{} == tau_{} == {}", i + 1, j + 1, term.tau),
                );
            }
        }
    }
    let named = [("A", &sys.a), ("B", &sys.b), ("B_in", &sys.b_in), ("C", &sys.c)];
    for (name, m) in named {
        if !crate::linalg::all_finite(m) {
            report.push(ViolationCode::NonFinite, format!("{} has non-finite entries", name));
        }
    }
    for (i, term) in sys.delays.iter().enumerate() {
        if !crate::linalg::all_finite(&term.matrix) {
            report.push(
                ViolationCode::NonFinite,
                format!("N_{} has non-finite entries", i + 1),
            );
        }
    }
    report
}

/// A control signal evaluated on the simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub enum SignalSpec {
    Zero { dim: usize },
    Constant(DVector<f64>),
    /// `u(t) = sin(freq · t) · 𝟏`
    SineAllOnes { freq: f64, dim: usize },
    /// One value per grid node `t_j = j·dt`.
    Sampled(Vec<DVector<f64>>),
}

impl SignalSpec {
    pub fn dim(&self) -> usize {
        match self {
            SignalSpec::Zero { dim } | SignalSpec::SineAllOnes { dim, .. } => *dim,
            SignalSpec::Constant(c) => c.len(),
            SignalSpec::Sampled(v) => v.first().map_or(0, |x| x.len()),
        }
    }

    /// Value at node `j` (time `t = j·dt`).
    pub fn value(&self, j: usize, t: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        self.write_value(j, t, &mut out);
        out
    }

    pub(crate) fn write_value(&self, j: usize, t: f64, out: &mut DVector<f64>) {
        match self {
            SignalSpec::Zero { .. } => out.fill(0.0),
            SignalSpec::Constant(c) => out.copy_from(c),
            SignalSpec::SineAllOnes { freq, .. } => out.fill((freq * t).sin()),
            SignalSpec::Sampled(v) => out.copy_from(&v[j]),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            SignalSpec::Zero { .. } => true,
            SignalSpec::Constant(c) => c.iter().all(|v| *v == 0.0),
            SignalSpec::SineAllOnes { dim, .. } => *dim == 0,
            SignalSpec::Sampled(v) => v.iter().all(|x| x.iter().all(|e| *e == 0.0)),
        }
    }

    /// Checks sampled length against the grid and finiteness.
    pub fn check(&self, nodes: usize) -> Result<(), String> {
        match self {
            SignalSpec::Constant(c) if !c.iter().all(|v| v.is_finite()) => {
                Err("constant signal has non-finite entries".into())
            }
            SignalSpec::SineAllOnes { freq, .. } if !freq.is_finite() => {
                Err("sine frequency is not finite".into())
            }
            SignalSpec::Sampled(v) => {
                if v.len() < nodes {
                    return Err(format!("sampled signal has {} values, grid needs {}", v.len(), nodes));
                }
                let dim = self.dim();
                if v.iter().any(|x| x.len() != dim) {
                    return Err("sampled signal has ragged dimensions".into());
                }
                if !v.iter().all(|x| x.iter().all(|e| e.is_finite())) {
                    return Err("sampled signal has non-finite entries".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

/// State on `[−max τ_i, 0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum HistorySpec {
    Zero,
    /// Values at `t = −L·dt, …, −dt` where `L = max τ_i / dt`, oldest first.
    Sampled(Vec<DVector<f64>>),
}

/// Initial state `x(0)`, either as coordinates `w` in the `B_in` column
/// frame or as an explicit state vector.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Coordinates(DVector<f64>),
    Explicit(DVector<f64>),
}

impl InitialState {
    pub fn zero(sys: &DelaySystem) -> Self {
        InitialState::Coordinates(DVector::zeros(sys.dim_initial()))
    }

    pub fn state(&self, sys: &DelaySystem) -> Result<DVector<f64>, String> {
        match self {
            InitialState::Coordinates(w) => {
                if w.len() != sys.dim_initial() {
                    return Err(format!(
                        "initial coordinates have length {}, B_in has {} columns",
                        w.len(),
                        sys.dim_initial()
                    ));
                }
                Ok(&sys.b_in * w)
            }
            InitialState::Explicit(x) => {
                if x.len() != sys.dim_state() {
                    return Err(format!(
                        "explicit initial state has length {}, state dimension is {}",
                        x.len(),
                        sys.dim_state()
                    ));
                }
                Ok(x.clone())
            }
        }
    }

    /// Norm used by the error bounds: `‖w‖` for coordinates, `‖x‖` otherwise.
    pub fn norm(&self) -> f64 {
        match self {
            InitialState::Coordinates(w) => w.norm(),
            InitialState::Explicit(x) => x.norm(),
        }
    }
}
