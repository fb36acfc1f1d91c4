//! The `qrf` command line.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analytics;
use crate::density::{reduce_external, reduce_relative, Reduced};
use crate::dynamics::{
    evolve_absolute, evolve_classical_frame, evolve_relative, ClassicalFrameHamiltonian, FramePath, PotentialSpec,
    RelativeHamiltonian, Schedule, Trajectory,
};
use crate::error::{QrfError, Result};
use crate::frame::CoordinateFrame;
use crate::gaussian::GaussianSuperposition;
use crate::grid::{Axis, GridState};
use crate::io::{self, BranchSpec, RunManifest, Series, StateFile};
use crate::mass::MassConfig;
use crate::phase::{probe, ProbeReport};
use crate::scenario::{self, ScenarioConfig, ScenarioReport};
use crate::selftest;
use crate::state::State;
use crate::transform::catalog;
use crate::uncertainty::{self, BoundReport, MomentReport};

#[derive(Debug, Parser)]
#[command(name = "qrf", version, about = "Quantum reference frame laboratory for 1D multi-particle systems")]
pub struct Cli {
    /// Override ħ in every state file and config.
    #[arg(long, global = true)]
    pub hbar: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Keep {
    Relative,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Curve {
    /// `Δx1/Δx_r1` against the linear entropy `E`.
    DispersionRatio,
    /// `1 − ½ tanh²α` against `α`.
    TwoBranchPurity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScenarioArg {
    Board,
    BoardMd,
    ThirdParticle,
}

impl ScenarioArg {
    fn id(self) -> scenario::ScenarioId {
        match self {
            ScenarioArg::Board => scenario::ScenarioId::Board,
            ScenarioArg::BoardMd => scenario::ScenarioId::BoardMd,
            ScenarioArg::ThirdParticle => scenario::ScenarioId::ThirdParticle,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply a catalog transform to a state file.
    Transform {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        transform: String,
        #[arg(long)]
        out: PathBuf,
        /// Also dump A, B and A Bᵀ as CSV into this directory.
        #[arg(long)]
        matrices: Option<PathBuf>,
    },
    /// Reduced density matrix as CSV plus a JSON header.
    Reduce {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum)]
        keep: Keep,
        /// Particle kept by `--keep external`.
        #[arg(long, default_value_t = 1)]
        particle: usize,
        /// Grid points per kept axis for Gaussian states.
        #[arg(long, default_value_t = 64)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Closed-form curves.
    Analytics {
        #[arg(long, value_enum)]
        curve: Curve,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Upper end of the abscissa (default 0.49 for E, 5 for α).
        #[arg(long)]
        max: Option<f64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Moments and uncertainty bounds.
    Uncertainty {
        #[arg(long)]
        state: PathBuf,
        /// `all` or a comma list such as `x_r1:p_r2,x_r2:p_r1`.
        #[arg(long, default_value = "all")]
        pairs: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// `⟨exp(i Σ δ_i p_i / ħ)⟩` and its decomposition.
    PhaseProbe {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
        delta: Vec<f64>,
        #[arg(long, default_value = "cm_relative")]
        basis: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split-step evolution; writes samples, snapshots and a manifest.
    Evolve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// End-to-end interferometer scenarios.
    Scenario {
        #[arg(value_enum)]
        which: ScenarioArg,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Dark-port probability against the branch phase.
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Quick invariant suite.
    Selftest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// 0 on success, 2 for configuration problems, 3 for numeric budgets.
pub fn exit_code(e: &QrfError) -> u8 {
    if e.is_numeric_budget() {
        3
    } else {
        2
    }
}

/// Entry point used by the binary.
pub fn main() -> ExitCode {
    configure_threads();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let argv: Vec<String> = std::env::args().collect();
    match run(&cli, argv) {
        Ok(0) => ExitCode::SUCCESS,
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("QRF_THREADS").ok().and_then(|v| v.trim().parse::<usize>().ok()) {
        if n > 0 {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn out_dir(out: &Path) -> PathBuf {
    match out.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn load_state(path: &Path, hbar: Option<f64>) -> Result<(StateFile, Vec<u8>)> {
    let bytes = std::fs::read(path)?;
    let text = String::from_utf8_lossy(&bytes);
    let f = StateFile::parse_named(&text, &path.display().to_string())?.with_hbar(hbar);
    Ok((f, bytes))
}

/// Runs a parsed command and returns its exit code.
pub fn run(cli: &Cli, argv: Vec<String>) -> Result<u8> {
    let hbar = cli.hbar;
    if let Some(h) = hbar {
        if !(h > 0.0 && h.is_finite()) {
            return Err(QrfError::Config(format!("--hbar {h} must be positive")));
        }
    }
    match &cli.command {
        Command::Transform { state, transform, out, matrices } => {
            let (f, bytes) = load_state(state, hbar)?;
            let g = f.gaussian()?;
            let t = catalog::by_name(transform, g.masses()).map_err(|e| QrfError::Config(e.to_string()))?;
            let image = t.apply_to_gaussian(&g)?;
            let mut file = StateFile::from_gaussian(&image);
            if f.grid.is_some() {
                file.grid = Some(scenario::covering_axes(&image)?);
            }
            io::write_json(out, &file)?;
            let mut written = vec![out.clone()];
            if let Some(dir) = matrices {
                let inputs = t.input().position_labels();
                let a = dir.join("position_block.csv");
                let b = dir.join("momentum_block.csv");
                let c = dir.join("commutator_table.csv");
                io::write_matrix_csv(&a, &inputs, t.position_block())?;
                io::write_matrix_csv(&b, &inputs, t.momentum_block())?;
                let outs: Vec<String> = t.output().labels().iter().map(|l| l.momentum.clone()).collect();
                io::write_matrix_csv(&c, &outs, &t.commutator_table())?;
                written.extend([a, b, c]);
            }
            finish(argv, &bytes, image.hbar(), out, written)
        }
        Command::Reduce { state, keep, particle, points, out } => {
            let (f, bytes) = load_state(state, hbar)?;
            let s = f.state()?;
            let (reduced, axes) = match keep {
                Keep::Relative => {
                    let r = reduce_relative(&s)?;
                    let axes = reduced_axes(&s, &r, None, *points)?;
                    (r, axes)
                }
                Keep::External => {
                    if *particle >= s.masses().len() {
                        return Err(QrfError::Config(format!("no particle {particle}")));
                    }
                    let r = reduce_external(&s, *particle)?;
                    let axes = reduced_axes(&s, &r, Some(*particle), *points)?;
                    (r, axes)
                }
            };
            let rho = reduced.to_grid(&axes)?;
            let side = io::write_density(out, &rho, reduced.purity()?)?;
            finish(argv, &bytes, s.masses().hbar(), out, vec![out.clone(), side])
        }
        Command::Analytics { curve, samples, max, out, svg } => {
            let (header, points, xl, yl) = match curve {
                Curve::DispersionRatio => {
                    let pts = analytics::dispersion_curve(*samples, max.unwrap_or(0.49))?;
                    (["E", "ratio"], pts, "linear entropy E", "Δx1 / Δx_r1")
                }
                Curve::TwoBranchPurity => {
                    if *samples < 2 {
                        return Err(QrfError::Config("need at least two samples".into()));
                    }
                    let top = max.unwrap_or(5.0);
                    let pts = (0..*samples)
                        .map(|i| {
                            let a = top * i as f64 / (*samples - 1) as f64;
                            analytics::two_branch_purity(a).map(|p| (a, p))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    (["alpha", "purity"], pts, "α", "purity")
                }
            };
            let rows: Vec<Vec<f64>> = points.iter().map(|&(x, y)| vec![x, y]).collect();
            io::write_csv(out, &header.map(String::from), &rows)?;
            let mut written = vec![out.clone()];
            if let Some(p) = svg {
                io::write_text(p, &io::line_plot(&format!("{curve:?}"), xl, yl, &[Series::new(yl, points)]))?;
                written.push(p.clone());
            }
            finish(argv, &[], hbar.unwrap_or(1.0), out, written)
        }
        Command::Uncertainty { state, pairs, out } => {
            let (f, bytes) = load_state(state, hbar)?;
            let s = f.state()?;
            let report = uncertainty_report(&s, pairs)?;
            io::write_json(out, &report)?;
            finish(argv, &bytes, s.masses().hbar(), out, vec![out.clone()])
        }
        Command::PhaseProbe { state, delta, basis, out } => {
            let (f, bytes) = load_state(state, hbar)?;
            let s = f.state()?;
            let report = ProbeFile { schema: "qrf-probe/1".into(), probe: probe(&s, delta, basis)? };
            io::write_json(out, &report)?;
            finish(argv, &bytes, s.masses().hbar(), out, vec![out.clone()])
        }
        Command::Evolve { config, out } => {
            let bytes = std::fs::read(config)?;
            let mut cfg: RunConfig = io::parse_json(&String::from_utf8_lossy(&bytes), &config.display().to_string())?;
            if hbar.is_some() {
                cfg.hbar = hbar;
            }
            let traj = cfg.run()?;
            let written = write_trajectory(out, &traj)?;
            let manifest = RunManifest::start(argv, Some(&bytes), cfg.hbar.unwrap_or(1.0));
            manifest.finish(out, &written)?;
            Ok(0)
        }
        Command::Scenario { which, config, out, svg } => {
            let (cfg, bytes) = scenario_config(*which, config.as_deref(), hbar)?;
            let report = scenario::run(&cfg)?;
            io::write_json(out, &report)?;
            let mut written = vec![out.clone()];
            if let Some(p) = svg {
                io::write_text(p, &scenario_plot(&cfg, &report)?)?;
                written.push(p.clone());
            }
            finish(argv, &bytes, cfg.hbar, out, written)
        }
        Command::Selftest { out } => {
            let checks = selftest::run();
            for c in &checks {
                println!("{} {:<32} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            if let Some(p) = out {
                io::write_json(p, &checks)?;
                finish(argv, &[], 1.0, p, vec![p.clone()])?;
            }
            Ok(if checks.iter().all(|c| c.passed) { 0 } else { 3 })
        }
    }
}

fn finish(argv: Vec<String>, config: &[u8], hbar: f64, out: &Path, written: Vec<PathBuf>) -> Result<u8> {
    let config = if config.is_empty() { None } else { Some(config) };
    RunManifest::start(argv, config, hbar).finish(&out_dir(out), &written)?;
    Ok(0)
}

/// Axes for the kept coordinates: the state's own grid, or `points` samples
/// spanning the covering box of the Gaussian state in the matching frame.
fn reduced_axes(s: &State, r: &Reduced, external: Option<usize>, points: usize) -> Result<Vec<Axis>> {
    if let Reduced::Grid(g) = r {
        return Ok(g.axes().to_vec());
    }
    let State::Gaussian(g) = s else { unreachable!("grid states reduce on the grid") };
    let (source, keep): (GaussianSuperposition, Vec<usize>) = match external {
        Some(k) => (g.clone(), vec![k]),
        None => {
            let moved = if g.frame().is_absolute() { catalog::cm_relative(g.masses())?.apply_to_gaussian(g)? } else { g.clone() };
            let n = moved.dim();
            (moved, (1..n).collect())
        }
    };
    let n = points.checked_pow(keep.len() as u32).unwrap_or(usize::MAX);
    if n > 4096 {
        return Err(QrfError::Config(format!("{n} grid points per density row; lower --points")));
    }
    let cover = scenario::covering_axes(&source)?;
    keep.iter().map(|&k| Axis::new(cover[k].min, cover[k].max, points)).collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairBound {
    pub a: String,
    pub b: String,
    pub product: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UncertaintyFile {
    pub schema: String,
    pub moments: MomentReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_bounds: Option<BoundReport>,
    pub pairs: Vec<PairBound>,
}

fn uncertainty_report(s: &State, pairs: &str) -> Result<UncertaintyFile> {
    let masses = s.masses();
    let requested: Vec<(String, String)> = if pairs == "all" {
        let n = masses.len();
        (1..n)
            .flat_map(|j| (1..n).map(move |k| (format!("x_r{j}"), format!("p_r{k}"))))
            .chain((0..n).map(|i| (format!("x{i}"), format!("p{i}"))))
            .collect()
    } else {
        pairs
            .split(',')
            .map(|p| {
                p.split_once(':')
                    .map(|(a, b)| (a.trim().to_string(), b.trim().to_string()))
                    .ok_or_else(|| QrfError::Config(format!("pair `{p}` is not of the form a:b")))
            })
            .collect::<Result<_>>()?
    };
    let mut labels: Vec<String> = Vec::new();
    for (a, b) in &requested {
        for l in [a, b] {
            if !labels.contains(l) {
                labels.push(l.clone());
            }
        }
    }
    let moments = uncertainty::moments(s, &labels).map_err(|e| match e {
        QrfError::UnknownObservable(_) | QrfError::InvalidArgument(_) => QrfError::Config(e.to_string()),
        other => other,
    })?;
    let pairs = requested
        .iter()
        .map(|(a, b)| {
            let (i, j) = (moments.index(a)?, moments.index(b)?);
            let product = moments.std(a)? * moments.std(b)?;
            let bound = moments.bounds[i][j];
            Ok(PairBound { a: a.clone(), b: b.clone(), product, bound, margin: product - bound })
        })
        .collect::<Result<Vec<_>>>()?;
    let relative_bounds = if pairs_is_all(&requested, masses) { Some(uncertainty::verify_bounds(s)?) } else { None };
    Ok(UncertaintyFile { schema: "qrf-uncertainty/1".into(), moments, relative_bounds, pairs })
}

fn pairs_is_all(requested: &[(String, String)], masses: &MassConfig) -> bool {
    requested.len() == (masses.len() - 1).pow(2) + masses.len()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeFile {
    pub schema: String,
    #[serde(flatten)]
    pub probe: ProbeReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Relative coordinates `x_rj` under the reduced kinetic operator.
    #[default]
    Relative,
    Absolute,
    /// Quantum particles seen from a prescribed classical origin.
    Classical,
}

/// `qrf evolve` configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: Mode,
    /// All particle masses (reference first); quantum particles only in classical mode.
    pub masses: Vec<f64>,
    #[serde(default)]
    pub hbar: Option<f64>,
    #[serde(default)]
    pub potential: PotentialSpec,
    pub grid: Vec<Axis>,
    /// Initial branches in the mode's own coordinates.
    pub initial: Vec<BranchSpec>,
    pub dt: f64,
    pub steps: usize,
    /// Snapshot every `stride` steps; 0 keeps the first and last only.
    #[serde(default)]
    pub stride: usize,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub path: Option<FramePath>,
}

impl RunConfig {
    pub fn masses(&self) -> Result<MassConfig> {
        MassConfig::with_hbar(self.masses.clone(), self.hbar.unwrap_or(1.0))
    }

    fn frame(&self, masses: &MassConfig) -> CoordinateFrame {
        match self.mode {
            Mode::Relative => CoordinateFrame::relative_only(masses),
            Mode::Absolute => CoordinateFrame::absolute(masses.len()),
            Mode::Classical => CoordinateFrame::classical(masses.len()),
        }
    }

    pub fn initial_state(&self) -> Result<GridState> {
        let masses = self.masses()?;
        let frame = self.frame(&masses);
        let branches = self.initial.iter().map(BranchSpec::build).collect::<Result<Vec<_>>>()?;
        let g = GaussianSuperposition::new(frame, masses, branches)?;
        GridState::rasterize(&g, &self.grid)
    }

    pub fn run(&self) -> Result<Trajectory> {
        if self.mode != Mode::Classical && self.path.is_some() {
            return Err(QrfError::Config("`path` applies to classical mode only".into()));
        }
        let masses = self.masses()?;
        let s = self.initial_state()?;
        let schedule = Schedule::new(self.dt, self.steps).with_stride(self.stride);
        match self.mode {
            Mode::Relative => evolve_relative(&RelativeHamiltonian::new(masses, self.potential.clone())?, &s, schedule),
            Mode::Absolute => evolve_absolute(&masses, &self.potential, &s, schedule),
            Mode::Classical => {
                let path = self.path.clone().unwrap_or_else(FramePath::at_rest);
                let h = ClassicalFrameHamiltonian::new(self.epsilon, path, masses, self.potential.clone())?;
                evolve_classical_frame(&h, &s, schedule)
            }
        }
    }
}

/// `samples.csv` plus one `snapshot_NNNNNN.csv` per kept snapshot.
pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<Vec<PathBuf>> {
    let first = traj.final_state();
    let labels = first.frame().position_labels();
    let momenta: Vec<String> = first.frame().labels().iter().map(|l| l.momentum.clone()).collect();
    let mut header = vec!["t".to_string(), "norm".into(), "energy".into()];
    header.extend(labels.iter().map(|l| format!("mean_{l}")));
    header.extend(momenta.iter().map(|l| format!("mean_{l}")));
    header.extend(labels.iter().map(|l| format!("force_{l}")));
    let rows: Vec<Vec<f64>> = traj
        .samples
        .iter()
        .map(|s| {
            let mut r = vec![s.t, s.norm, s.energy];
            r.extend(&s.mean_x);
            r.extend(&s.mean_p);
            r.extend(&s.mean_force);
            r
        })
        .collect();
    let samples = dir.join("samples.csv");
    io::write_csv(&samples, &header, &rows)?;
    let mut written = vec![samples];
    for (step, st) in &traj.snapshots {
        let mut h = labels.clone();
        h.push("re".into());
        h.push("im".into());
        let rows: Vec<Vec<f64>> = st
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let mut r = st.point(i);
                r.push(a.re);
                r.push(a.im);
                r
            })
            .collect();
        let p = dir.join(format!("snapshot_{step:06}.csv"));
        io::write_csv(&p, &h, &rows)?;
        written.push(p);
    }
    Ok(written)
}

/// Reads a scenario config; the subcommand fixes the scenario id.
pub fn scenario_config(which: ScenarioArg, path: Option<&Path>, hbar: Option<f64>) -> Result<(ScenarioConfig, Vec<u8>)> {
    let (mut cfg, bytes) = match path {
        None => (ScenarioConfig::new(which.id()), Vec::new()),
        Some(p) => {
            let bytes = std::fs::read(p)?;
            let mut v: serde_json::Value = io::parse_json(&String::from_utf8_lossy(&bytes), &p.display().to_string())?;
            let obj = v
                .as_object_mut()
                .ok_or_else(|| QrfError::Config(format!("{}: expected a JSON object", p.display())))?;
            let name = serde_json::to_value(which.id())?;
            match obj.get("scenario") {
                None => {
                    obj.insert("scenario".into(), name);
                }
                Some(given) if *given == name => {}
                Some(given) => {
                    return Err(QrfError::Config(format!("config is for scenario {given}, command asked for {name}")))
                }
            }
            let cfg: ScenarioConfig =
                serde_json::from_value(v).map_err(|e| QrfError::Config(format!("{}: {e}", p.display())))?;
            (cfg, bytes)
        }
    };
    if let Some(h) = hbar {
        cfg.hbar = h;
    }
    Ok((cfg, bytes))
}

/// Detector-2 probability over one turn of the branch phase, one curve per frame.
fn scenario_plot(cfg: &ScenarioConfig, report: &ScenarioReport) -> Result<String> {
    let frames: Vec<String> = report.interference.iter().map(|i| i.frame.clone()).collect();
    let mut series: Vec<Series> = frames.iter().map(|f| Series::new(f.clone(), Vec::new())).collect();
    for i in 0..=48 {
        let phase = 2.0 * PI * i as f64 / 48.0;
        let r = scenario::run(&ScenarioConfig { phase, ..cfg.clone() })?;
        for (s, f) in series.iter_mut().zip(&frames) {
            if let Some(it) = r.interference_in(f) {
                s.points.push((phase, it.p2));
            }
        }
    }
    Ok(io::line_plot(cfg.scenario.name(), "branch phase φ", "P(detector 2)", &series))
}
