//! Fixed-step integration of the three system classes.
//!
//! Deterministic and bilinear systems use forward Euler; stochastic systems
//! use Euler–Maruyama with the delayed state in the diffusion:
//!
//! ```text
//! x_{j+1} = x_j + dt (A x_j + B u_j) + Σ c_{i,j} N_i x_{j − ℓ_i}
//! c_{i,j} = dt            (deterministic)
//!         = dt · v(t_j)   (bilinear)
//!         = √dt · ξ_{i,j} (stochastic)
//! ```
//!
//! Every delay must be an integer number `ℓ_i` of steps, so delayed states
//! are read from grid nodes without interpolation. Past states live in a
//! ring buffer of `max ℓ_i + 1` slots seeded from the history.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use num_traits::Float;
use thiserror::Error;

use crate::rng;
use crate::sysmodel::{DelaySystem, HistorySpec, InitialState, SignalSpec, SystemKind};

/// Relative tolerance for `τ = ℓ · dt`.
pub const COMMENSURATE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("delay {tau} is not an integer multiple of dt = {dt}")]
    IncommensurateDelay { tau: f64, dt: f64 },
    #[error("expected a {expected} system, got {got}")]
    WrongKind { expected: SystemKind, got: SystemKind },
    #[error("number of paths must be positive")]
    NoPaths,
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid input: {0}")]
    BadInput(String),
    #[error("ensembles are not comparable: {0}")]
    Mismatch(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub dt: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(dt: f64, steps: usize) -> Result<Self, SimError> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(SimError::InvalidGrid(format!("dt = {}", dt)));
        }
        if steps == 0 {
            return Err(SimError::InvalidGrid("zero steps".into()));
        }
        Ok(Self { dt, steps })
    }

    /// Grid covering `[0, horizon]`; the horizon must be a whole number of steps.
    pub fn with_horizon(dt: f64, horizon: f64) -> Result<Self, SimError> {
        let steps = lag_steps(horizon, dt).map_err(|_| {
            SimError::InvalidGrid(format!("horizon {} is not a multiple of dt = {}", horizon, dt))
        })?;
        Self::new(dt, steps)
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn horizon(&self) -> f64 {
        self.dt * self.steps as f64
    }

    pub fn nodes(&self) -> usize {
        self.steps + 1
    }

    pub fn lag(&self, tau: f64) -> Result<usize, SimError> {
        lag_steps(tau, self.dt)
    }
}

fn lag_steps(tau: f64, dt: f64) -> Result<usize, SimError> {
    let ratio = tau / dt;
    let rounded = ratio.round();
    if !(rounded >= 1.0) || (ratio - rounded).abs() > COMMENSURATE_TOL * ratio.abs() {
        return Err(SimError::IncommensurateDelay { tau, dt });
    }
    Ok(rounded as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseMode {
    NotApplicable,
    /// Every simulated system draws from its own Brownian motions.
    Independent,
    /// All systems share the Brownian motions of a path.
    Common,
}

impl NoiseMode {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseMode::NotApplicable => "n/a",
            NoiseMode::Independent => "independent",
            NoiseMode::Common => "common",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEnsemble {
    pub grid: Grid,
    pub n_paths: usize,
    /// Per path, `(steps + 1) × d`; absent when states were not recorded.
    pub states: Option<Vec<DMatrix<f64>>>,
    /// Per path, `(steps + 1) × m`.
    pub outputs: Vec<DMatrix<f64>>,
    pub seed: u64,
    pub noise_mode: NoiseMode,
}

/// One simulated path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathTrajectory {
    pub states: Option<DMatrix<f64>>,
    pub outputs: DMatrix<f64>,
}

/// Monte-Carlo settings for stochastic runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SddeRun {
    pub n_paths: usize,
    pub noise_mode: NoiseMode,
    pub seed: u64,
    /// Identifies the simulated system in [`NoiseMode::Independent`] runs;
    /// ignored for common noise.
    pub system_id: u64,
    pub record_states: bool,
}

impl SddeRun {
    pub fn new(n_paths: usize, noise_mode: NoiseMode, seed: u64) -> Self {
        Self {
            n_paths,
            noise_mode,
            seed,
            system_id: 0,
            record_states: false,
        }
    }

    pub fn system(mut self, id: u64) -> Self {
        self.system_id = id;
        self
    }

    pub fn with_states(mut self, record: bool) -> Self {
        self.record_states = record;
        self
    }

    fn key(&self) -> u64 {
        match self.noise_mode {
            NoiseMode::Independent => self.system_id,
            _ => 0,
        }
    }
}

/// Validated inputs shared by all integrators.
struct Prepared {
    lags: Vec<usize>,
    max_lag: usize,
    x0: DVector<f64>,
    history: Vec<DVector<f64>>,
}

fn prepare(
    sys: &DelaySystem,
    u: &SignalSpec,
    x0: &InitialState,
    hist: &HistorySpec,
    grid: &Grid,
) -> Result<Prepared, SimError> {
    if let Some(v) = sys.validate().violations.first() {
        return Err(SimError::BadInput(format!("{}", v)));
    }
    if grid.steps == 0 || !(grid.dt > 0.0) {
        return Err(SimError::InvalidGrid(format!("dt = {}, steps = {}", grid.dt, grid.steps)));
    }
    if u.dim() != sys.dim_input() {
        return Err(SimError::BadInput(format!(
            "control has dimension {}, B has {} columns",
            u.dim(),
            sys.dim_input()
        )));
    }
    u.check(grid.steps).map_err(SimError::BadInput)?;
    let lags = sys
        .delays
        .iter()
        .map(|t| grid.lag(t.tau))
        .collect::<Result<Vec<_>, _>>()?;
    let max_lag = lags.iter().copied().max().unwrap_or(0);
    let x0 = x0.state(sys).map_err(SimError::BadInput)?;
    let d = sys.dim_state();
    let history = match hist {
        HistorySpec::Zero => vec![DVector::zeros(d); max_lag],
        HistorySpec::Sampled(values) => {
            if values.len() != max_lag {
                return Err(SimError::BadInput(format!(
                    "history has {} samples, expected {}",
                    values.len(),
                    max_lag
                )));
            }
            if values.iter().any(|v| v.len() != d || !v.iter().all(|e| e.is_finite())) {
                return Err(SimError::BadInput("history samples must be finite d-vectors".into()));
            }
            values.clone()
        }
    };
    Ok(Prepared {
        lags,
        max_lag,
        x0,
        history,
    })
}

/// Forward sweep; `coeff(j, i)` is the multiplier of `N_i x_{j − ℓ_i}`.
fn integrate<F>(
    sys: &DelaySystem,
    prep: &Prepared,
    u: &SignalSpec,
    grid: &Grid,
    record_states: bool,
    mut coeff: F,
) -> PathTrajectory
where
    F: FnMut(usize, usize) -> f64,
{
    let d = sys.dim_state();
    let m = sys.dim_output();
    let slots = prep.max_lag + 1;
    let mut ring: Vec<DVector<f64>> = vec![DVector::zeros(d); slots];
    for (k, h) in prep.history.iter().enumerate() {
        // history[k] sits at index k − max_lag
        let idx = (k as isize - prep.max_lag as isize).rem_euclid(slots as isize) as usize;
        ring[idx].copy_from(h);
    }
    ring[0].copy_from(&prep.x0);

    let mut states = if record_states {
        Some(DMatrix::zeros(grid.nodes(), d))
    } else {
        None
    };
    let mut outputs = DMatrix::zeros(grid.nodes(), m);
    let mut y = DVector::zeros(m);
    let mut uj = DVector::zeros(sys.dim_input());
    let mut next = DVector::zeros(d);
    let forced = !u.is_zero();

    let mut record = |j: usize, x: &DVector<f64>, y: &mut DVector<f64>| {
        y.gemv(1.0, &sys.c, x, 0.0);
        outputs.set_row(j, &y.transpose());
        if let Some(s) = states.as_mut() {
            s.set_row(j, &x.transpose());
        }
    };

    record(0, &ring[0], &mut y);
    for j in 0..grid.steps {
        let cur = j % slots;
        next.copy_from(&ring[cur]);
        next.gemv(grid.dt, &sys.a, &ring[cur], 1.0);
        if forced {
            u.write_value(j, grid.time(j), &mut uj);
            next.gemv(grid.dt, &sys.b, &uj, 1.0);
        }
        for (i, term) in sys.delays.iter().enumerate() {
            let c = coeff(j, i);
            if c != 0.0 {
                let idx = (j as isize - prep.lags[i] as isize).rem_euclid(slots as isize) as usize;
                next.gemv(c, &term.matrix, &ring[idx], 1.0);
            }
        }
        let slot = (j + 1) % slots;
        ring[slot].copy_from(&next);
        record(j + 1, &next, &mut y);
    }
    PathTrajectory { states, outputs }
}

fn require_kind(sys: &DelaySystem, expected: SystemKind) -> Result<(), SimError> {
    if sys.kind != expected {
        return Err(SimError::WrongKind {
            expected,
            got: sys.kind,
        });
    }
    Ok(())
}

fn single(grid: Grid, path: PathTrajectory) -> TrajectoryEnsemble {
    TrajectoryEnsemble {
        grid,
        n_paths: 1,
        states: path.states.map(|s| vec![s]),
        outputs: vec![path.outputs],
        seed: 0,
        noise_mode: NoiseMode::NotApplicable,
    }
}

/// Forward Euler for `x' = A x + Σ N_i x(t − τ_i) + B u`.
pub fn simulate_dde(
    sys: &DelaySystem,
    u: &SignalSpec,
    x0: &InitialState,
    hist: &HistorySpec,
    grid: &Grid,
) -> Result<TrajectoryEnsemble, SimError> {
    require_kind(sys, SystemKind::DeterministicDelay)?;
    let prep = prepare(sys, u, x0, hist, grid)?;
    let dt = grid.dt;
    Ok(single(*grid, integrate(sys, &prep, u, grid, true, |_, _| dt)))
}

/// Forward Euler for `x' = A x + Σ N_i x(t − τ_i) v(t) + B u` with scalar `v`.
pub fn simulate_bilinear_dde(
    sys: &DelaySystem,
    u: &SignalSpec,
    v: &SignalSpec,
    x0: &InitialState,
    hist: &HistorySpec,
    grid: &Grid,
) -> Result<TrajectoryEnsemble, SimError> {
    require_kind(sys, SystemKind::BilinearDelay)?;
    if v.dim() != 1 {
        return Err(SimError::BadInput(format!("v must be scalar, got dimension {}", v.dim())));
    }
    v.check(grid.steps).map_err(SimError::BadInput)?;
    let prep = prepare(sys, u, x0, hist, grid)?;
    let dt = grid.dt;
    let vs: Vec<f64> = (0..grid.steps).map(|j| v.value(j, grid.time(j))[0]).collect();
    Ok(single(*grid, integrate(sys, &prep, u, grid, true, |j, _| dt * vs[j])))
}

/// Prepared stochastic simulation whose paths can be run in any order.
pub struct SddeSimulator<'a> {
    sys: &'a DelaySystem,
    u: &'a SignalSpec,
    grid: Grid,
    prep: Prepared,
    run: SddeRun,
}

impl<'a> SddeSimulator<'a> {
    pub fn new(
        sys: &'a DelaySystem,
        u: &'a SignalSpec,
        xi: &InitialState,
        hist: &HistorySpec,
        grid: &Grid,
        run: SddeRun,
    ) -> Result<Self, SimError> {
        require_kind(sys, SystemKind::StochasticDelay)?;
        if run.n_paths == 0 {
            return Err(SimError::NoPaths);
        }
        let prep = prepare(sys, u, xi, hist, grid)?;
        Ok(Self {
            sys,
            u,
            grid: *grid,
            prep,
            run,
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn run(&self) -> SddeRun {
        self.run
    }

    /// Path `p`; its noise depends only on `(seed, system, p, term)`.
    pub fn path(&self, p: usize) -> PathTrajectory {
        let key = self.run.key();
        let terms = self.sys.delays.len();
        let mut streams: Vec<_> = (0..terms)
            .map(|i| rng::stream(self.run.seed, key, rng::path_stream(p, i)))
            .collect();
        let sqrt_dt = self.grid.dt.sqrt();
        integrate(self.sys, &self.prep, self.u, &self.grid, self.run.record_states, |_, i| {
            sqrt_dt * rng::standard_normal(&mut streams[i])
        })
    }

    pub fn assemble(&self, paths: Vec<PathTrajectory>) -> TrajectoryEnsemble {
        let record = self.run.record_states;
        let mut states = Vec::new();
        let mut outputs = Vec::with_capacity(paths.len());
        for p in paths {
            if let Some(s) = p.states {
                states.push(s);
            }
            outputs.push(p.outputs);
        }
        TrajectoryEnsemble {
            grid: self.grid,
            n_paths: outputs.len(),
            states: if record { Some(states) } else { None },
            outputs,
            seed: self.run.seed,
            noise_mode: self.run.noise_mode,
        }
    }
}

/// Euler–Maruyama for `dX = (A X + B u) dt + Σ N_i X(t − τ_i) dW_i`, paths
/// run serially in index order.
pub fn simulate_sdde(
    sys: &DelaySystem,
    u: &SignalSpec,
    xi: &InitialState,
    hist: &HistorySpec,
    grid: &Grid,
    run: SddeRun,
) -> Result<TrajectoryEnsemble, SimError> {
    let sim = SddeSimulator::new(sys, u, xi, hist, grid, run)?;
    let paths = (0..run.n_paths).map(|p| sim.path(p)).collect();
    Ok(sim.assemble(paths))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Error {
    pub value: f64,
    pub std_error: f64,
}

impl L2Error {
    /// `√(mean I_p)` with the standard error of the mean pushed through the
    /// square root; `I_p = dt Σ_j ‖Δy(t_j)‖²` per path.
    pub fn from_path_integrals(integrals: &[f64]) -> Self {
        let n = integrals.len();
        if n == 0 {
            return Self {
                value: 0.0,
                std_error: 0.0,
            };
        }
        let mean = integrals.iter().sum::<f64>() / n as f64;
        let value = mean.max(0.0).sqrt();
        if n < 2 || value == 0.0 {
            return Self { value, std_error: 0.0 };
        }
        let var = integrals.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
        let se_mean = (var / n as f64).sqrt();
        Self {
            value,
            std_error: se_mean / (2.0 * value),
        }
    }
}

/// `dt Σ_{j < steps} ‖y1_j − y2_j‖²` (rectangle rule on the Euler nodes).
pub fn path_square_integral(y1: &DMatrix<f64>, y2: &DMatrix<f64>, grid: &Grid) -> f64 {
    let mut acc = 0.0;
    for j in 0..grid.steps {
        let diff = y1.row(j) - y2.row(j);
        acc += diff.norm_squared();
    }
    grid.dt * acc
}

pub fn l2_output_error(e1: &TrajectoryEnsemble, e2: &TrajectoryEnsemble) -> Result<L2Error, SimError> {
    if e1.grid != e2.grid {
        return Err(SimError::Mismatch("grids differ"));
    }
    if e1.n_paths != e2.n_paths {
        return Err(SimError::Mismatch("path counts differ"));
    }
    let integrals: Vec<f64> = e1
        .outputs
        .iter()
        .zip(&e2.outputs)
        .map(|(a, b)| {
            if a.shape() != b.shape() {
                Err(SimError::Mismatch("output dimensions differ"))
            } else {
                Ok(path_square_integral(a, b, &e1.grid))
            }
        })
        .collect::<Result<_, _>>()?;
    Ok(L2Error::from_path_integrals(&integrals))
}
