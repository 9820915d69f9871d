use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use delaybt::config::{load_config, parse_signal_form, preset};
use delaybt::output::{write_study_outputs, write_trajectory_csv};
use delaybt::parallel::{simulate_parallel, RayonRunner};
use delaybt::{load_system, save_system, FileError};
use delaybt_core::balance::{self, BalanceError};
use delaybt_core::bench::{self, ExampleKind, PathRunner, SerialRunner, SignalForm, StudyError, StudyFailure};
use delaybt_core::sim::{self, SddeRun, SddeSimulator};
use delaybt_core::{
    DVector, DelaySystem, GramianVariant, Grid, HistorySpec, InitialState, LyapunovError, LyapunovOptions, NoiseMode,
    SystemKind,
};

/// Full system generated by `bench`, saved next to the study outputs.
const SYSTEM_MANIFEST: &str = "system.toml";

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;
const EXIT_NO_CONVERGENCE: u8 = 3;
const EXIT_NOT_CERTIFIED: u8 = 4;

#[derive(Parser)]
#[command(name = "delaybt", version, about = "Balanced truncation and error bounds for delay systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Variant {
    Bilinear,
    Sdde,
}

#[derive(Clone, Copy, ValueEnum)]
enum Noise {
    Independent,
    Common,
}

#[derive(Subcommand)]
enum Command {
    /// Check a system manifest for structural problems
    Validate { manifest: PathBuf },
    /// Solve for the Gramians and print the Hankel singular values
    Gramians {
        manifest: PathBuf,
        /// Defaults to sdde for stochastic systems and bilinear otherwise
        #[arg(long, value_enum)]
        variant: Option<Variant>,
    },
    /// Balance and truncate to order r, writing the reduced system to a directory
    Reduce {
        manifest: PathBuf,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate the a-priori output error bound between two systems
    Bound {
        full: PathBuf,
        reduced: PathBuf,
        /// Control u: zero, const:<c> or sin:<freq>
        #[arg(long, default_value = "zero", value_parser = parse_signal_form)]
        control: SignalForm,
        /// Scalar bilinear control v
        #[arg(long, default_value = "const:1", value_parser = parse_signal_form)]
        v: SignalForm,
        /// Norm of the initial coordinates w
        #[arg(long, default_value_t = 1.0)]
        x0_norm: f64,
        #[arg(long = "T", default_value_t = 2.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        /// Exit with status 4 when a hypothesis is not certified
        #[arg(long)]
        strict: bool,
    },
    /// Simulate a system and write trajectories as CSV
    Simulate {
        manifest: PathBuf,
        #[arg(long, default_value = "zero", value_parser = parse_signal_form)]
        control: SignalForm,
        /// Scalar bilinear control v
        #[arg(long, default_value = "const:1", value_parser = parse_signal_form)]
        v: SignalForm,
        /// Initial coordinates w: zero or const:<c>
        #[arg(long, default_value = "zero", value_parser = parse_signal_form)]
        x0: SignalForm,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long)]
        dt: f64,
        #[arg(long, default_value_t = 1)]
        paths: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "independent")]
        noise: Noise,
        /// Include state columns
        #[arg(long)]
        states: bool,
        /// Output file; standard output when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a reduction study on a benchmark system
    Bench {
        /// stuart-landau, gle or gbm
        name: String,
        /// TOML file overriding fields of the preset
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        /// Run Monte-Carlo paths on a single thread
        #[arg(long)]
        serial: bool,
        /// Exit with status 4 when any row is not certified
        #[arg(long)]
        strict: bool,
    },
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn new(code: u8, msg: impl ToString) -> Self {
        Self { code, msg: msg.to_string() }
    }
}

impl From<FileError> for Failure {
    fn from(e: FileError) -> Self {
        let code = match e {
            FileError::Io { .. } | FileError::Csv(_) => EXIT_FAILURE,
            _ => EXIT_INVALID,
        };
        Failure::new(code, e)
    }
}

impl From<BalanceError> for Failure {
    fn from(e: BalanceError) -> Self {
        let code = match (&e, e.lyapunov()) {
            (BalanceError::InvalidSystem(_), _) => EXIT_INVALID,
            (_, Some(LyapunovError::NoConvergence { .. })) => EXIT_NO_CONVERGENCE,
            _ => EXIT_FAILURE,
        };
        Failure::new(code, e)
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::new(EXIT_FAILURE, e)
    }
}

type CliResult = Result<(), Failure>;

fn load_valid(path: &Path) -> Result<DelaySystem, Failure> {
    let sys = load_system(path)?;
    let report = sys.validate();
    if let Some(v) = report.violations.first() {
        return Err(Failure::new(EXIT_INVALID, format!("{}: {}", path.display(), v)));
    }
    Ok(sys)
}

fn default_variant(kind: SystemKind) -> GramianVariant {
    match kind {
        SystemKind::StochasticDelay => GramianVariant::SddeRule,
        _ => GramianVariant::BilinearRule,
    }
}

fn validate(manifest: &Path) -> CliResult {
    let sys = load_system(manifest)?;
    let report = sys.validate();
    let mut out = io::stdout().lock();
    for v in &report.violations {
        writeln!(out, "{}: {}", v.code.as_str(), v.detail)?;
    }
    if !report.is_valid() {
        return Err(Failure::new(
            EXIT_INVALID,
            format!("{}: {} violation(s)", manifest.display(), report.violations.len()),
        ));
    }
    writeln!(
        out,
        "ok: {} d={} n={} k={} m={} delays={}",
        sys.kind,
        sys.dim_state(),
        sys.dim_input(),
        sys.dim_initial(),
        sys.dim_output(),
        sys.delays.len()
    )?;
    Ok(())
}

fn gramians(manifest: &Path, variant: Option<Variant>) -> CliResult {
    let sys = load_valid(manifest)?;
    let variant = match variant {
        Some(Variant::Bilinear) => GramianVariant::BilinearRule,
        Some(Variant::Sdde) => GramianVariant::SddeRule,
        None => default_variant(sys.kind),
    };
    let gram = balance::compute_gramians(&sys, variant, &LyapunovOptions::default())?;
    let bal = balance::balance_transform(&sys, &gram)?;
    let mut out = io::stdout().lock();
    writeln!(out, "variant = {}", variant.as_str())?;
    writeln!(out, "iterations = [{}, {}]", gram.iterations.0, gram.iterations.1)?;
    writeln!(out, "residuals = [{:e}, {:e}]", gram.residuals.0, gram.residuals.1)?;
    writeln!(out, "i,hsv")?;
    for (i, s) in bal.hsv.iter().enumerate() {
        writeln!(out, "{},{:e}", i + 1, s)?;
    }
    Ok(())
}

fn reduce(manifest: &Path, r: usize, out_dir: &Path) -> CliResult {
    let sys = load_valid(manifest)?;
    let variant = default_variant(sys.kind);
    let gram = balance::compute_gramians(&sys, variant, &LyapunovOptions::default())?;
    let bal = balance::balance_transform(&sys, &gram)?;
    let red = balance::truncate(&bal, r)?;
    let path = out_dir.join("reduced.toml");
    save_system(&red.system, &path)?;
    let mut out = io::stdout().lock();
    if red.near_degenerate_gap {
        eprintln!("warning: truncation splits (nearly) equal Hankel singular values");
    }
    writeln!(out, "reduced order {} of {} (rank {})", r, sys.dim_state(), bal.rank())?;
    writeln!(out, "hsv_tail_sum = {:e}", red.tail_sum())?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn study_failure(e: StudyFailure) -> Failure {
    match e {
        StudyFailure::Balance(b) => b.into(),
        StudyFailure::Config(m) => Failure::new(EXIT_INVALID, m),
        other => Failure::new(EXIT_FAILURE, other),
    }
}

#[allow(clippy::too_many_arguments)]
fn bound(
    full: &Path,
    reduced: &Path,
    control: SignalForm,
    v: SignalForm,
    x0_norm: f64,
    horizon: f64,
    dt: f64,
    strict: bool,
) -> CliResult {
    let f = load_valid(full)?;
    let r = load_valid(reduced)?;
    if f.kind != r.kind {
        return Err(Failure::new(EXIT_INVALID, "full and reduced systems are of different kinds"));
    }
    let grid = Grid::with_horizon(dt, horizon).map_err(|e| Failure::new(EXIT_INVALID, e))?;
    let mut warnings = Vec::new();
    let report = bench::reduction_bound(
        &f,
        &r,
        &control.to_spec(f.dim_input()),
        &v.to_spec(1),
        x0_norm,
        &grid,
        &LyapunovOptions::default(),
        &mut warnings,
    )
    .map_err(study_failure)?;
    for w in &warnings {
        eprintln!("warning: {}", w);
    }
    let mut out = io::stdout().lock();
    writeln!(out, "trace_norm = {:e}", report.trace_norm)?;
    for (name, value) in &report.components {
        writeln!(out, "{} = {:e}", name, value)?;
    }
    writeln!(out, "bound = {:e}", report.bound_value)?;
    for a in &report.assumptions {
        let status = if a.assumed {
            "assumed"
        } else if a.satisfied {
            "ok"
        } else {
            "FAILED"
        };
        writeln!(out, "assumption {} {} (margin {:e})", a.name, status, a.margin)?;
    }
    let certified = report.certified() && report.bound_value.is_finite();
    writeln!(out, "certified = {}", certified)?;
    if !warnings.is_empty() && !report.bound_value.is_finite() {
        return Err(Failure::new(EXIT_NO_CONVERGENCE, "error-system Gramians did not converge"));
    }
    if strict && !certified {
        return Err(Failure::new(EXIT_NOT_CERTIFIED, "bound hypotheses are not certified"));
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    manifest: &Path,
    control: SignalForm,
    v: SignalForm,
    x0: SignalForm,
    horizon: f64,
    dt: f64,
    paths: usize,
    seed: u64,
    noise: Noise,
    states: bool,
    out: Option<&Path>,
) -> CliResult {
    let sys = load_valid(manifest)?;
    let grid = Grid::with_horizon(dt, horizon).map_err(|e| Failure::new(EXIT_INVALID, e))?;
    let w = match x0 {
        SignalForm::Zero => DVector::zeros(sys.dim_initial()),
        SignalForm::Constant { value } => DVector::from_element(sys.dim_initial(), value),
        SignalForm::Sine { .. } => return Err(Failure::new(EXIT_INVALID, "--x0 must be zero or const:<c>")),
    };
    let x0 = InitialState::Coordinates(w);
    let u = control.to_spec(sys.dim_input());
    let sim_err = |e: sim::SimError| Failure::new(EXIT_INVALID, e);
    let mut ens = match sys.kind {
        SystemKind::DeterministicDelay => sim::simulate_dde(&sys, &u, &x0, &HistorySpec::Zero, &grid).map_err(sim_err)?,
        SystemKind::BilinearDelay => {
            sim::simulate_bilinear_dde(&sys, &u, &v.to_spec(1), &x0, &HistorySpec::Zero, &grid).map_err(sim_err)?
        }
        SystemKind::StochasticDelay => {
            let mode = match noise {
                Noise::Independent => NoiseMode::Independent,
                Noise::Common => NoiseMode::Common,
            };
            let run = SddeRun::new(paths, mode, seed).with_states(states);
            let s = SddeSimulator::new(&sys, &u, &x0, &HistorySpec::Zero, &grid, run).map_err(sim_err)?;
            simulate_parallel(&s)
        }
    };
    if !states {
        ens.states = None;
    }
    match out {
        Some(p) => {
            let f = std::fs::File::create(p).map_err(|e| Failure::new(EXIT_FAILURE, format!("{}: {}", p.display(), e)))?;
            write_trajectory_csv(&ens, io::BufWriter::new(f))?;
        }
        None => write_trajectory_csv(&ens, io::stdout().lock())?,
    }
    Ok(())
}

fn study_error(e: &StudyError) -> Failure {
    let code = if e.is_non_convergence() {
        EXIT_NO_CONVERGENCE
    } else {
        match e.failure {
            StudyFailure::Config(_) | StudyFailure::Balance(BalanceError::InvalidSystem(_)) => EXIT_INVALID,
            _ => EXIT_FAILURE,
        }
    };
    Failure::new(code, e)
}

fn run_bench(name: &str, config: Option<&Path>, out_dir: &Path, serial: bool, strict: bool) -> CliResult {
    let cfg = match config {
        Some(p) => load_config(p, name)?,
        None => preset(name).ok_or_else(|| {
            Failure::new(EXIT_INVALID, format!("unknown benchmark {:?} (stuart-landau, gle, gbm)", name))
        })?,
    };
    let runner: &dyn PathRunner = if serial { &SerialRunner } else { &RayonRunner };
    let sys = match &cfg.example {
        ExampleKind::FromFile(p) => load_valid(Path::new(p))?,
        _ => cfg.build_system().map_err(|e| study_error(&e))?,
    };
    let result = bench::run_reduction_study_on(&cfg, &sys, runner);
    let report = result.map_err(|e| study_error(&e))?;
    for w in &report.manifest.warnings {
        eprintln!("warning: {}", w);
    }
    let mut written = write_study_outputs(&report, out_dir)?;
    if !matches!(cfg.example, ExampleKind::FromFile(_)) {
        let p = out_dir.join(SYSTEM_MANIFEST);
        save_system(&sys, &p)?;
        written.push(p);
    }
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{:>4} {:>12} {:>12} {:>12} {:>12} {:>9}",
        "r", "trace_norm", "bound", "error", "std_error", "certified"
    )?;
    for row in &report.rows {
        writeln!(
            out,
            "{:>4} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>9}",
            row.r, row.trace_norm, row.bound, row.measured_error, row.measured_std_error, row.certified
        )?;
    }
    for p in written {
        writeln!(out, "wrote {}", p.display())?;
    }
    if strict && report.rows.iter().any(|r| !r.certified) {
        return Err(Failure::new(EXIT_NOT_CERTIFIED, "some rows are not certified"));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { manifest } => validate(&manifest),
        Command::Gramians { manifest, variant } => gramians(&manifest, variant),
        Command::Reduce { manifest, r, out } => reduce(&manifest, r, &out),
        Command::Bound {
            full,
            reduced,
            control,
            v,
            x0_norm,
            horizon,
            dt,
            strict,
        } => bound(&full, &reduced, control, v, x0_norm, horizon, dt, strict),
        Command::Simulate {
            manifest,
            control,
            v,
            x0,
            horizon,
            dt,
            paths,
            seed,
            noise,
            states,
            out,
        } => simulate(&manifest, control, v, x0, horizon, dt, paths, seed, noise, states, out.as_deref()),
        Command::Bench {
            name,
            config,
            out,
            serial,
            strict,
        } => run_bench(&name, config.as_deref(), &out, serial, strict),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
    }
}
