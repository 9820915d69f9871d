//! Benchmark systems and end-to-end reduction studies.
//!
//! A study reduces one system to every requested order, evaluates the error
//! bound that matches the system class and measures the actual output error
//! by simulating the full and reduced models with identical inputs.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::balance::{self, BalanceError, GramianVariant};
use crate::bounds::{self, Assumption, BoundError, BoundReport};
use crate::linalg::{spectral_abscissa, sym_eigen_sorted, sym_sqrt};
use crate::lyapunov::{LyapunovError, LyapunovOptions, STABILITY_MARGIN};
use crate::rng;
use crate::sim::{self, Grid, L2Error, NoiseMode, SddeRun, SddeSimulator, SimError};
use crate::stability::{self, Envelope, SddeMsRecord, StabilityError};
use crate::sysmodel::{DelaySystem, DelayTerm, HistorySpec, InitialState, SignalSpec, SystemKind};

/// Key used for drawing random system matrices.
const GENERATOR_KEY: u64 = 0x0067_656e;
/// Key used for drawing random initial states.
const INITIAL_KEY: u64 = 0x696e_6974;
/// Resampling budget when a random mass or stiffness matrix is not positive definite.
const GLE_ATTEMPTS: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("mass or stiffness matrix not positive definite after {0} attempts")]
    NotPositiveDefinite(usize),
    #[error("GLE system is unstable (max Re λ = {0:e})")]
    GleUnstable(f64),
}

/// `A = αI`, one delay term with the cyclic shift `x_j ← x_{(j+1) mod d}`,
/// and `B = B_in = C = I`.
pub fn gen_stuart_landau(d: usize, alpha: f64, tau: f64) -> Result<DelaySystem, GeneratorError> {
    if d < 2 {
        return Err(GeneratorError::InvalidParameter(format!("d = {} (need d ≥ 2)", d)));
    }
    if !(alpha < 0.0) {
        return Err(GeneratorError::InvalidParameter(format!("alpha = {} (need alpha < 0)", alpha)));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(GeneratorError::InvalidParameter(format!("tau = {}", tau)));
    }
    let mut shift = DMatrix::zeros(d, d);
    for j in 0..d {
        shift[(j, (j + 1) % d)] = 1.0;
    }
    let ident = DMatrix::<f64>::identity(d, d);
    Ok(DelaySystem::new(
        &ident * alpha,
        vec![DelayTerm::new(shift, tau)],
        ident.clone(),
        ident.clone(),
        ident,
        SystemKind::DeterministicDelay,
    ))
}

/// `t^{2(H−1)}`
pub fn gle_kernel(hurst: f64, t: f64) -> f64 {
    t.powf(2.0 * (hurst - 1.0))
}

fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sym_eigen_sorted(m).0.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Linearized generalized Langevin equation in first-order form with state
/// `(q, p)` of dimension `2 d_particles`. The memory integral is replaced by
/// its midpoint value, a single delay at `r_mem / 2`.
///
/// Random parts: `M = I + 0.1 s diag(a)`, `F = I + 0.1 s diag(a')` and
/// `K = I + 0.1 s sym|a_ij / 2|`, where `s = perturb_scale`.
pub fn gen_gle(
    d_particles: usize,
    hurst: f64,
    r_mem: f64,
    perturb_scale: f64,
    seed: u64,
) -> Result<DelaySystem, GeneratorError> {
    if d_particles == 0 {
        return Err(GeneratorError::InvalidParameter("d_particles = 0".into()));
    }
    if !(hurst > 0.5 && hurst < 1.0) {
        return Err(GeneratorError::InvalidParameter(format!("H = {} (need 1/2 < H < 1)", hurst)));
    }
    if !(r_mem > 0.0) || !r_mem.is_finite() {
        return Err(GeneratorError::InvalidParameter(format!("r_mem = {}", r_mem)));
    }
    if !(perturb_scale >= 0.0) || !perturb_scale.is_finite() {
        return Err(GeneratorError::InvalidParameter(format!("perturb_scale = {}", perturb_scale)));
    }
    let p = d_particles;
    let ident = DMatrix::<f64>::identity(p, p);
    let mut stream = rng::stream(seed, GENERATOR_KEY, 0);
    let scale = 0.1 * perturb_scale;

    let mut accepted = None;
    for _ in 0..GLE_ATTEMPTS {
        let a = rng::gaussian_vector(&mut stream, p, 1.0);
        let a2 = rng::gaussian_vector(&mut stream, p, 1.0);
        let aij = rng::gaussian_matrix(&mut stream, p, p, 1.0);
        let mass = &ident + DMatrix::from_diagonal(&(&a * scale));
        let friction = &ident + DMatrix::from_diagonal(&(&a2 * scale));
        let abs_half = aij.map(|v| (v / 2.0).abs());
        let stiffness = &ident + (&abs_half + abs_half.transpose()) * (scale / 2.0);
        if min_eigenvalue(&mass) > 0.0 && min_eigenvalue(&stiffness) > 0.0 {
            accepted = Some((mass, friction, stiffness));
            break;
        }
    }
    let (mass, friction, stiffness) = accepted.ok_or(GeneratorError::NotPositiveDefinite(GLE_ATTEMPTS))?;

    let l1 = sym_sqrt(&stiffness);
    let l2 = sym_sqrt(&mass);
    let l2_inv = l2
        .clone()
        .try_inverse()
        .ok_or(GeneratorError::NotPositiveDefinite(GLE_ATTEMPTS))?;
    let l2_inv_t = l2_inv.transpose();

    let d = 2 * p;
    let mut a = DMatrix::zeros(d, d);
    a.view_mut((0, p), (p, p)).copy_from(&(l1.transpose() * &l2_inv_t));
    a.view_mut((p, 0), (p, p)).copy_from(&(-(&l2_inv * &l1)));
    a.view_mut((p, p), (p, p)).copy_from(&(-(&l2_inv * &friction * &l2_inv_t)));

    let abscissa = spectral_abscissa(&a).unwrap_or(f64::NAN);
    if !(abscissa < -STABILITY_MARGIN) {
        return Err(GeneratorError::GleUnstable(abscissa));
    }

    let tau = r_mem / 2.0;
    let weight = r_mem * gle_kernel(hurst, tau);
    let mut lower = DMatrix::zeros(d, d);
    lower.view_mut((p, p), (p, p)).fill_with_identity();
    Ok(DelaySystem::new(
        a,
        vec![DelayTerm::new(&lower * weight, tau)],
        lower,
        DMatrix::identity(d, d),
        DMatrix::identity(d, d),
        SystemKind::DeterministicDelay,
    ))
}

/// Geometric Brownian motion with one delayed multiplicative noise term:
/// `A = −I + (a_ij)`, `B = I + (a'_ij)`, `N = I + (a''_ij)` with entries of
/// standard deviation `perturb_std`, `C = diag(1 ×r_obs, 0.01 ×(d − r_obs))`.
pub fn gen_gbm(d: usize, r_obs: usize, tau: f64, perturb_std: f64, seed: u64) -> Result<DelaySystem, GeneratorError> {
    if r_obs == 0 || r_obs > d {
        return Err(GeneratorError::InvalidParameter(format!("r_obs = {} with d = {}", r_obs, d)));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(GeneratorError::InvalidParameter(format!("tau = {}", tau)));
    }
    if !(perturb_std >= 0.0) || !perturb_std.is_finite() {
        return Err(GeneratorError::InvalidParameter(format!("perturb_std = {}", perturb_std)));
    }
    let ident = DMatrix::<f64>::identity(d, d);
    let mut stream = rng::stream(seed, GENERATOR_KEY, 0);
    let a = -&ident + rng::gaussian_matrix(&mut stream, d, d, perturb_std);
    let b = &ident + rng::gaussian_matrix(&mut stream, d, d, perturb_std);
    let n = &ident + rng::gaussian_matrix(&mut stream, d, d, perturb_std);
    let c = DMatrix::from_diagonal(&DVector::from_fn(d, |i, _| if i < r_obs { 1.0 } else { 0.01 }));
    Ok(DelaySystem::new(
        a,
        vec![DelayTerm::new(n, tau)],
        b,
        ident,
        c,
        SystemKind::StochasticDelay,
    ))
}

/// Replaces the control matrix by the single column `B·dir` and the initial
/// space by a zero column. Useful when every input channel carries the same
/// signal and the study starts from rest.
pub fn lump_control(sys: &DelaySystem, dir: &DVector<f64>) -> DelaySystem {
    let mut out = sys.clone();
    out.b = DMatrix::from_column_slice(sys.dim_state(), 1, (&sys.b * dir).as_slice());
    out.b_in = DMatrix::zeros(sys.dim_state(), 1);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExampleKind {
    StuartLandau,
    Gle,
    Gbm,
    /// System manifest on disk; loading is left to the caller.
    FromFile(String),
}

impl ExampleKind {
    pub fn name(&self) -> &str {
        match self {
            ExampleKind::StuartLandau => "stuart-landau",
            ExampleKind::Gle => "gle",
            ExampleKind::Gbm => "gbm",
            ExampleKind::FromFile(p) => p,
        }
    }
}

/// Scalar waveform broadcast to every input channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum SignalForm {
    Zero,
    Constant { value: f64 },
    Sine { freq: f64 },
}

impl SignalForm {
    pub fn to_spec(self, dim: usize) -> SignalSpec {
        match self {
            SignalForm::Zero => SignalSpec::Zero { dim },
            SignalForm::Constant { value } => SignalSpec::Constant(DVector::from_element(dim, value)),
            SignalForm::Sine { freq } => SignalSpec::SineAllOnes { freq, dim },
        }
    }
}

impl fmt::Display for SignalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalForm::Zero => f.write_str("zero"),
            SignalForm::Constant { value } => write!(f, "const:{}", value),
            SignalForm::Sine { freq } => write!(f, "sin:{}", freq),
        }
    }
}

/// Initial coordinates `w` with `x(0) = B_in w`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum InitialForm {
    Zero,
    Constant { value: f64 },
    /// `w ~ N(0, covariance · I)`, drawn from the study seed.
    Gaussian { covariance: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExampleConfig {
    pub example: ExampleKind,
    /// State dimension (number of particles for the GLE).
    pub d: usize,
    pub alpha: f64,
    pub hurst: f64,
    pub memory: f64,
    pub perturb_scale: f64,
    pub perturb_std: f64,
    pub r_obs: usize,
    /// Drive the GLE through one lumped input `B·𝟏` and start from rest.
    pub lump_control: bool,
    pub tau: f64,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub dt: f64,
    pub reduction_dims: Vec<usize>,
    pub n_paths: usize,
    pub seed: u64,
    pub u_form: SignalForm,
    pub v_form: SignalForm,
    pub initial: InitialForm,
    /// Orders whose trajectories are kept for plotting.
    pub overlay_dims: Vec<usize>,
}

impl Default for ExampleConfig {
    fn default() -> Self {
        Self::stuart_landau()
    }
}

impl ExampleConfig {
    pub fn stuart_landau() -> Self {
        Self {
            example: ExampleKind::StuartLandau,
            d: 50,
            alpha: -1.2,
            hurst: 0.75,
            memory: 0.2,
            perturb_scale: 1.0,
            perturb_std: 0.01,
            r_obs: 10,
            lump_control: true,
            tau: 0.1,
            horizon: 2.0,
            dt: 0.01,
            reduction_dims: (1..=12).collect(),
            n_paths: 1,
            seed: 2024,
            u_form: SignalForm::Zero,
            v_form: SignalForm::Constant { value: 1.0 },
            initial: InitialForm::Gaussian {
                covariance: 0.5f64.sqrt(),
            },
            overlay_dims: vec![2, 6],
        }
    }

    pub fn gle() -> Self {
        Self {
            example: ExampleKind::Gle,
            d: 50,
            tau: 0.1,
            memory: 0.2,
            horizon: 10.0,
            reduction_dims: vec![2, 5, 10, 20],
            u_form: SignalForm::Sine { freq: 20.0 },
            initial: InitialForm::Zero,
            overlay_dims: vec![10],
            ..Self::stuart_landau()
        }
    }

    pub fn gbm() -> Self {
        Self {
            example: ExampleKind::Gbm,
            d: 40,
            tau: 0.1,
            horizon: 2.0,
            r_obs: 10,
            perturb_std: 0.01,
            reduction_dims: vec![5, 10, 15, 20, 25, 30, 35],
            n_paths: 2000,
            u_form: SignalForm::Sine { freq: 20.0 },
            initial: InitialForm::Constant { value: 0.1 },
            overlay_dims: vec![20],
            ..Self::stuart_landau()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "stuart-landau" => Some(Self::stuart_landau()),
            "gle" => Some(Self::gle()),
            "gbm" => Some(Self::gbm()),
            _ => None,
        }
    }

    pub fn grid(&self) -> Result<Grid, SimError> {
        Grid::with_horizon(self.dt, self.horizon)
    }

    /// Builds the configured system; file-backed examples must be loaded by
    /// the caller.
    pub fn build_system(&self) -> Result<DelaySystem, StudyError> {
        let sys = match &self.example {
            ExampleKind::StuartLandau => gen_stuart_landau(self.d, self.alpha, self.tau)?,
            ExampleKind::Gle => {
                let sys = gen_gle(self.d, self.hurst, self.memory, self.perturb_scale, self.seed)?;
                if self.lump_control {
                    lump_control(&sys, &DVector::from_element(sys.dim_input(), 1.0))
                } else {
                    sys
                }
            }
            ExampleKind::Gbm => gen_gbm(self.d, self.r_obs, self.tau, self.perturb_std, self.seed)?,
            ExampleKind::FromFile(path) => {
                return Err(StudyError::config(format!("system file {} must be loaded by the caller", path)))
            }
        };
        Ok(sys)
    }

    pub fn check(&self, sys: &DelaySystem) -> Result<Grid, StudyError> {
        let grid = self.grid().map_err(|e| StudyError::config(e.to_string()))?;
        for t in &sys.delays {
            grid.lag(t.tau).map_err(|e| StudyError::config(e.to_string()))?;
        }
        if self.reduction_dims.is_empty() {
            return Err(StudyError::config("no reduction orders given".into()));
        }
        if let Some(&r) = self.reduction_dims.iter().find(|&&r| r == 0 || r > sys.dim_state()) {
            return Err(StudyError::config(format!(
                "reduction order {} outside 1..={}",
                r,
                sys.dim_state()
            )));
        }
        if sys.kind == SystemKind::StochasticDelay && self.n_paths == 0 {
            return Err(StudyError::config("n_paths must be positive".into()));
        }
        Ok(grid)
    }

    pub fn initial_coordinates(&self, dim: usize) -> DVector<f64> {
        match self.initial {
            InitialForm::Zero => DVector::zeros(dim),
            InitialForm::Constant { value } => DVector::from_element(dim, value),
            InitialForm::Gaussian { covariance } => {
                let mut s = rng::stream(self.seed, INITIAL_KEY, rng::AUX_STREAM);
                rng::gaussian_vector(&mut s, dim, covariance.max(0.0).sqrt())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StudyFailure {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    Balance(#[from] BalanceError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct StudyError {
    /// Reduction order being processed when the failure happened.
    pub r: Option<usize>,
    pub failure: StudyFailure,
}

impl fmt::Display for StudyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.r {
            Some(r) => write!(f, "r = {}: {}", r, self.failure),
            None => write!(f, "{}", self.failure),
        }
    }
}

impl StudyError {
    fn config(msg: String) -> Self {
        Self {
            r: None,
            failure: StudyFailure::Config(msg),
        }
    }

    fn at(r: usize) -> impl Fn(StudyFailure) -> StudyError {
        move |failure| StudyError { r: Some(r), failure }
    }

    /// True when the failure is a Lyapunov solve that ran out of iterations.
    pub fn is_non_convergence(&self) -> bool {
        match &self.failure {
            StudyFailure::Balance(b) => matches!(b.lyapunov(), Some(LyapunovError::NoConvergence { .. })),
            _ => false,
        }
    }
}

impl<T: Into<StudyFailure>> From<T> for StudyError {
    fn from(e: T) -> Self {
        StudyError { r: None, failure: e.into() }
    }
}

/// Executes independent Monte-Carlo paths. Results must come back in path
/// order so that reductions over paths are reproducible.
pub trait PathRunner: Sync {
    fn map_paths(&self, n: usize, f: &(dyn Fn(usize) -> [f64; 2] + Sync)) -> Vec<[f64; 2]>;
}

pub struct SerialRunner;

impl PathRunner for SerialRunner {
    fn map_paths(&self, n: usize, f: &(dyn Fn(usize) -> [f64; 2] + Sync)) -> Vec<[f64; 2]> {
        (0..n).map(f).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub r: usize,
    pub hsv_tail_sum: f64,
    pub trace_norm: f64,
    pub bound: f64,
    pub measured_error: f64,
    pub measured_std_error: f64,
    pub certified: bool,
    /// `measured_error / ‖y‖_{L²}` of the full model.
    pub relative_error: f64,
    pub near_degenerate_gap: bool,
    pub assumptions: Vec<Assumption>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OverlayTrace {
    pub r: usize,
    pub noise_mode: NoiseMode,
    /// `(steps + 1) × m` outputs of one path.
    pub full: DMatrix<f64>,
    pub reduced: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyManifest {
    pub config: ExampleConfig,
    pub kind: SystemKind,
    pub dim_state: usize,
    pub variant: GramianVariant,
    pub hsv: Vec<f64>,
    pub gramian_iterations: (usize, usize),
    /// Envelope of the full model's `A`.
    pub envelope: Option<Envelope>,
    pub volterra_q: Option<f64>,
    pub sdde_ms: Option<SddeMsRecord>,
    /// Initial coordinates `w` used by every simulation, `x(0) = B_in w`.
    pub initial_coordinates: Vec<f64>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyReport {
    pub example: String,
    pub grid: Grid,
    pub rows: Vec<StudyRow>,
    pub manifest: StudyManifest,
    pub overlays: Vec<OverlayTrace>,
}

fn variant_for(kind: SystemKind) -> GramianVariant {
    match kind {
        SystemKind::StochasticDelay => GramianVariant::SddeRule,
        _ => GramianVariant::BilinearRule,
    }
}

/// Contraction factor of the error system, which covers both models at once.
fn error_system_q(err: &DelaySystem) -> Option<f64> {
    let env = stability::semigroup_envelope(&err.a).ok()?;
    Some(stability::check_volterra(env.m, env.omega, &err.delay_matrices()).q)
}

struct Measurement {
    error: L2Error,
    output_norm: f64,
    overlay: Option<OverlayTrace>,
}

struct StudyContext<'a> {
    cfg: &'a ExampleConfig,
    sys: &'a DelaySystem,
    grid: Grid,
    u: SignalSpec,
    v: SignalSpec,
    w: DVector<f64>,
    opts: LyapunovOptions,
    runner: &'a dyn PathRunner,
}

impl StudyContext<'_> {
    fn simulate_det(&self, sys: &DelaySystem) -> Result<DMatrix<f64>, SimError> {
        let x0 = InitialState::Coordinates(self.w.clone());
        let traj = match sys.kind {
            SystemKind::BilinearDelay => {
                sim::simulate_bilinear_dde(sys, &self.u, &self.v, &x0, &HistorySpec::Zero, &self.grid)?
            }
            _ => sim::simulate_dde(sys, &self.u, &x0, &HistorySpec::Zero, &self.grid)?,
        };
        Ok(traj.outputs.into_iter().next().unwrap_or_else(|| DMatrix::zeros(0, 0)))
    }

    fn measure(&self, red: &DelaySystem, r: usize) -> Result<Measurement, SimError> {
        let keep = self.cfg.overlay_dims.contains(&r);
        if self.sys.kind != SystemKind::StochasticDelay {
            let y = self.simulate_det(self.sys)?;
            let yr = self.simulate_det(red)?;
            let zero = DMatrix::zeros(y.nrows(), y.ncols());
            let err = sim::path_square_integral(&y, &yr, &self.grid);
            let norm = sim::path_square_integral(&y, &zero, &self.grid);
            return Ok(Measurement {
                error: L2Error::from_path_integrals(&[err]),
                output_norm: norm.sqrt(),
                overlay: keep.then_some(OverlayTrace {
                    r,
                    noise_mode: NoiseMode::NotApplicable,
                    full: y,
                    reduced: yr,
                }),
            });
        }

        let x0 = InitialState::Coordinates(self.w.clone());
        let base = SddeRun::new(self.cfg.n_paths, NoiseMode::Independent, self.cfg.seed);
        let full = SddeSimulator::new(self.sys, &self.u, &x0, &HistorySpec::Zero, &self.grid, base.system(0))?;
        let reduced = SddeSimulator::new(red, &self.u, &x0, &HistorySpec::Zero, &self.grid, base.system(1))?;
        let grid = self.grid;
        let per_path = self.runner.map_paths(self.cfg.n_paths, &|p| {
            let y = full.path(p).outputs;
            let yr = reduced.path(p).outputs;
            let zero = DMatrix::zeros(y.nrows(), y.ncols());
            [
                sim::path_square_integral(&y, &yr, &grid),
                sim::path_square_integral(&y, &zero, &grid),
            ]
        });
        let errs: Vec<f64> = per_path.iter().map(|v| v[0]).collect();
        let norms: Vec<f64> = per_path.iter().map(|v| v[1]).collect();

        let overlay = if keep {
            let common = SddeRun::new(1, NoiseMode::Common, self.cfg.seed);
            let f = SddeSimulator::new(self.sys, &self.u, &x0, &HistorySpec::Zero, &self.grid, common)?;
            let g = SddeSimulator::new(red, &self.u, &x0, &HistorySpec::Zero, &self.grid, common)?;
            Some(OverlayTrace {
                r,
                noise_mode: NoiseMode::Common,
                full: f.path(0).outputs,
                reduced: g.path(0).outputs,
            })
        } else {
            None
        };
        Ok(Measurement {
            error: L2Error::from_path_integrals(&errs),
            output_norm: L2Error::from_path_integrals(&norms).value,
            overlay,
        })
    }

    fn bound(&self, red: &DelaySystem, warnings: &mut Vec<String>, r: usize) -> Result<BoundReport, StudyError> {
        let mut local = Vec::new();
        let report = reduction_bound(self.sys, red, &self.u, &self.v, self.w.norm(), &self.grid, &self.opts, &mut local)
            .map_err(StudyError::at(r))?;
        warnings.extend(local.into_iter().map(|w| format!("r = {}: {}", r, w)));
        Ok(report)
    }
}

/// Trace norm and matching bound for a full/reduced pair: the uncontrolled
/// delay bound on `[0, T]` for deterministic systems, the bilinear bound with
/// scalar control `v`, or the stochastic bound. `phi0` is the norm of the
/// initial coordinates. A generalized Lyapunov solve that fails to converge
/// yields an infinite, uncertified bound and a warning.
#[allow(clippy::too_many_arguments)]
pub fn reduction_bound(
    full: &DelaySystem,
    reduced: &DelaySystem,
    u: &SignalSpec,
    v: &SignalSpec,
    phi0: f64,
    grid: &Grid,
    opts: &LyapunovOptions,
    warnings: &mut Vec<String>,
) -> Result<BoundReport, StudyFailure> {
    let u_norms = bounds::signal_norms(u, grid)?;
    let (f, r, variant) = match full.kind {
        SystemKind::DeterministicDelay => {
            let s = grid.horizon().sqrt();
            (full.scale_delays(s), reduced.scale_delays(s), GramianVariant::BilinearRule)
        }
        kind => (full.clone(), reduced.clone(), variant_for(kind)),
    };
    let err = balance::build_error_system(&f, &r)?;
    let q = error_system_q(&err);
    let tn = match balance::hankel_spectrum(&err, variant, opts) {
        Ok(spec) => spec.trace_norm,
        Err(e) if matches!(e.lyapunov(), Some(LyapunovError::NoConvergence { .. })) => {
            warnings.push(format!("error-system Gramian did not converge ({})", e));
            f64::INFINITY
        }
        Err(e) => return Err(e.into()),
    };
    if !tn.is_finite() {
        return Ok(BoundReport {
            trace_norm: tn,
            bound_value: f64::INFINITY,
            components: Vec::new(),
            assumptions: vec![Assumption::unevaluated("error_gramian_converged")],
        });
    }
    let report = match full.kind {
        SystemKind::DeterministicDelay => bounds::bound_uncontrolled_delay(tn, phi0, &u_norms, grid.horizon(), q),
        SystemKind::BilinearDelay => {
            let v_norms = bounds::signal_norms(v, grid)?;
            bounds::bound_bilinear_delay(tn, phi0, &u_norms, &v_norms, q)
        }
        SystemKind::StochasticDelay => bounds::bound_sdde(tn, phi0, u_norms.l2, q),
    };
    Ok(report?)
}

/// Runs the configured study on the generated system.
pub fn run_reduction_study(cfg: &ExampleConfig, runner: &dyn PathRunner) -> Result<StudyReport, StudyError> {
    let sys = cfg.build_system()?;
    run_reduction_study_on(cfg, &sys, runner)
}

/// Reduces `sys` to each order in `cfg.reduction_dims` and compares bound and
/// measured error.
pub fn run_reduction_study_on(
    cfg: &ExampleConfig,
    sys: &DelaySystem,
    runner: &dyn PathRunner,
) -> Result<StudyReport, StudyError> {
    if let Some(v) = sys.validate().violations.first() {
        return Err(StudyError::config(format!("invalid system: {}", v)));
    }
    let grid = cfg.check(sys)?;
    let opts = LyapunovOptions::default();
    let variant = variant_for(sys.kind);
    let gram = balance::compute_gramians(sys, variant, &opts)?;
    let bal = balance::balance_transform(sys, &gram)?;

    let mut warnings = Vec::new();
    let envelope = stability::semigroup_envelope(&sys.a).ok();
    let volterra_q = envelope.map(|e| stability::check_volterra(e.m, e.omega, &sys.delay_matrices()).q);
    let sdde_ms = (sys.kind == SystemKind::StochasticDelay).then(|| {
        let zeros: Vec<DMatrix<f64>> = sys.delays.iter().map(|_| DMatrix::zeros(sys.dim_state(), sys.dim_state())).collect();
        stability::check_sdde_ms_stability(&sys.a, &zeros, &sys.delay_matrices(), sys.max_delay())
    });
    if let Some(rec) = &sdde_ms {
        if !rec.pass {
            warnings.push(format!(
                "mean-square stability test inconclusive (tau_max = {:.3e})",
                rec.tau_max
            ));
        }
    }

    let ctx = StudyContext {
        cfg,
        sys,
        grid,
        u: cfg.u_form.to_spec(sys.dim_input()),
        v: cfg.v_form.to_spec(1),
        w: cfg.initial_coordinates(sys.dim_initial()),
        opts,
        runner,
    };

    let mut dims = cfg.reduction_dims.clone();
    dims.sort_unstable();
    dims.dedup();
    let mut rows = Vec::with_capacity(dims.len());
    let mut overlays = Vec::new();
    for r in dims {
        let at = StudyError::at(r);
        let red = balance::truncate(&bal, r).map_err(|e| at(e.into()))?;
        if red.near_degenerate_gap {
            warnings.push(format!("r = {}: truncation splits (nearly) equal Hankel singular values", r));
        }
        let report = ctx.bound(&red.system, &mut warnings, r)?;
        let m = ctx.measure(&red.system, r).map_err(|e| at(e.into()))?;
        let relative_error = if m.output_norm > 0.0 {
            m.error.value / m.output_norm
        } else {
            f64::NAN
        };
        rows.push(StudyRow {
            r,
            hsv_tail_sum: red.tail_sum(),
            trace_norm: report.trace_norm,
            bound: report.bound_value,
            measured_error: m.error.value,
            measured_std_error: m.error.std_error,
            certified: report.certified() && report.bound_value.is_finite(),
            relative_error,
            near_degenerate_gap: red.near_degenerate_gap,
            assumptions: report.assumptions,
        });
        overlays.extend(m.overlay);
    }

    Ok(StudyReport {
        example: cfg.example.name().to_string(),
        grid,
        rows,
        manifest: StudyManifest {
            config: cfg.clone(),
            kind: sys.kind,
            dim_state: sys.dim_state(),
            variant,
            hsv: bal.hsv.clone(),
            gramian_iterations: gram.iterations,
            envelope,
            volterra_q,
            sdde_ms,
            initial_coordinates: ctx.w.iter().copied().collect(),
            warnings,
        },
        overlays,
    })
}
