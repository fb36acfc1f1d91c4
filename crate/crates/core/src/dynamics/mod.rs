//! Split-step evolution in the relative frame, the absolute cross-check and
//! the classical-frame family.

mod classical;
pub mod potential;

pub use classical::{classical_heisenberg_check, evolve_classical_frame, ClassicalFrameHamiltonian, FramePath};
pub use potential::{PairTerm, PotentialSpec, Profile, Spline};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::partial_trace;
use crate::error::{QrfError, Result};
use crate::frame::{CoordLabel, CoordinateFrame};
use crate::grid::{shape_of, unravel, Axis, FftNd, GridState};
use crate::mass::MassConfig;
use crate::state::Wavefunction;

/// Largest accepted `dt · max|T(k)| / ħ`.
pub const STABILITY_LIMIT: f64 = 0.5;
/// Outer fraction of each axis watched for probability leaking to the edge.
pub const EDGE_BAND: f64 = 0.05;
pub const EDGE_LIMIT: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub dt: f64,
    pub steps: usize,
    /// Keep a full snapshot every `stride` steps (0 keeps only the ends).
    #[serde(default)]
    pub stride: usize,
}

impl Schedule {
    pub fn new(dt: f64, steps: usize) -> Self {
        Self { dt, steps, stride: 0 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(QrfError::InvalidArgument(format!("time step {} must be positive", self.dt)));
        }
        Ok(())
    }
}

/// Expectation values recorded after every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub norm: f64,
    pub mean_x: Vec<f64>,
    /// Canonical momenta `ħ⟨k⟩` of the grid axes.
    pub mean_p: Vec<f64>,
    /// `−⟨∂V/∂x⟩` for the time-independent potential.
    pub mean_force: Vec<f64>,
    /// `⟨T⟩ + ⟨V⟩` of the time-independent part.
    pub energy: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub dt: f64,
    pub samples: Vec<Sample>,
    /// `(step, state)` pairs.
    pub snapshots: Vec<(usize, GridState)>,
}

impl Trajectory {
    pub fn final_state(&self) -> &GridState {
        &self.snapshots.last().expect("trajectory keeps its last state").1
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Largest `|norm − 1|` over the run.
    pub fn norm_drift(&self) -> f64 {
        self.samples.iter().map(|s| (s.norm - 1.0).abs()).fold(0.0, f64::max)
    }

    /// Largest `|E(t) − E(0)| / |E(0)|`.
    pub fn energy_drift(&self) -> f64 {
        let e0 = self.samples[0].energy;
        let scale = e0.abs().max(f64::MIN_POSITIVE);
        self.samples.iter().map(|s| (s.energy - e0).abs() / scale).fold(0.0, f64::max)
    }
}

/// A drive `(a(t), b(t))` scaling the time-dependent kinetic and potential tables.
type Drive<'a> = dyn Fn(f64) -> (f64, f64) + Sync + 'a;

/// Diagonal tables of a Hamiltonian `T(k) + a(t) g(k) + V(x) + b(t) h(x)`.
pub(crate) struct Engine {
    shape: Vec<usize>,
    fft: FftNd,
    hbar: f64,
    dv: f64,
    axes: Vec<Axis>,
    kinetic: Vec<f64>,
    kinetic_drive: Option<Vec<f64>>,
    potential: Vec<f64>,
    potential_drive: Option<Vec<f64>>,
    force: Vec<Vec<f64>>,
    ks: Vec<Vec<f64>>,
}

fn tabulate<F>(axes: &[Axis], values: impl Fn(&[usize]) -> Vec<f64> + Sync, f: F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let shape = shape_of(axes);
    let total: usize = shape.iter().product();
    (0..total)
        .into_par_iter()
        .map_init(
            || vec![0usize; shape.len()],
            |idx, flat| {
                unravel(flat, &shape, idx);
                f(&values(idx))
            },
        )
        .collect()
}

impl Engine {
    pub(crate) fn new<T, V, G>(axes: &[Axis], hbar: f64, kinetic: T, potential: V, gradient: G) -> Self
    where
        T: Fn(&[f64]) -> f64 + Sync,
        V: Fn(&[f64]) -> f64 + Sync,
        G: Fn(&[f64]) -> Vec<f64> + Sync,
    {
        let shape = shape_of(axes);
        let ks: Vec<Vec<f64>> = axes.iter().map(|a| a.wavenumbers()).collect();
        let k_at = |idx: &[usize]| idx.iter().enumerate().map(|(a, &i)| ks[a][i]).collect::<Vec<_>>();
        let x_at = |idx: &[usize]| idx.iter().enumerate().map(|(a, &i)| axes[a].point(i)).collect::<Vec<_>>();
        let kinetic = tabulate(axes, k_at, kinetic);
        let potential = tabulate(axes, x_at, potential);
        let d = axes.len();
        let force = (0..d).map(|c| tabulate(axes, x_at, |x| -gradient(x)[c])).collect();
        Self {
            fft: FftNd::new(&shape),
            shape,
            hbar,
            dv: crate::grid::cell_volume(axes),
            axes: axes.to_vec(),
            kinetic,
            kinetic_drive: None,
            potential,
            potential_drive: None,
            force,
            ks,
        }
    }

    pub(crate) fn with_kinetic_drive(mut self, g: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let ks = &self.ks;
        self.kinetic_drive =
            Some(tabulate(&self.axes, |idx| idx.iter().enumerate().map(|(a, &i)| ks[a][i]).collect(), g));
        self
    }

    pub(crate) fn with_potential_drive(mut self, h: impl Fn(&[f64]) -> f64 + Sync) -> Self {
        let axes = &self.axes;
        self.potential_drive =
            Some(tabulate(axes, |idx| idx.iter().enumerate().map(|(a, &i)| axes[a].point(i)).collect(), h));
        self
    }

    fn max_kinetic(&self, a: f64) -> f64 {
        match &self.kinetic_drive {
            None => self.kinetic.iter().fold(0.0, |m, v| m.max(v.abs())),
            Some(g) => self.kinetic.iter().zip(g).fold(0.0, |m, (t, g)| m.max((t + a * g).abs())),
        }
    }

    fn check_stability(&self, dt: f64, a: f64) -> Result<()> {
        let value = dt * self.max_kinetic(a) / self.hbar;
        if value >= STABILITY_LIMIT {
            return Err(QrfError::StabilityBudget { value, limit: STABILITY_LIMIT });
        }
        Ok(())
    }

    fn check_edges(&self, s: &GridState) -> Result<()> {
        for (axis, mass) in s.edge_mass(EDGE_BAND).into_iter().enumerate() {
            if mass > EDGE_LIMIT {
                return Err(QrfError::EdgeContact { axis, mass });
            }
        }
        Ok(())
    }

    fn kick(&self, psi: &mut [Complex64], half_dt: f64, b: f64) {
        let hbar = self.hbar;
        match &self.potential_drive {
            None => psi.par_iter_mut().zip(&self.potential).for_each(|(v, p)| {
                *v *= Complex64::from_polar(1.0, -p * half_dt / hbar);
            }),
            Some(h) => psi.par_iter_mut().zip(&self.potential).zip(h).for_each(|((v, p), h)| {
                *v *= Complex64::from_polar(1.0, -(p + b * h) * half_dt / hbar);
            }),
        }
    }

    fn drift(&self, psi: &mut [Complex64], dt: f64, a: f64) {
        let hbar = self.hbar;
        self.fft.forward(psi);
        match &self.kinetic_drive {
            None => psi.par_iter_mut().zip(&self.kinetic).for_each(|(v, t)| {
                *v *= Complex64::from_polar(1.0, -t * dt / hbar);
            }),
            Some(g) => psi.par_iter_mut().zip(&self.kinetic).zip(g).for_each(|((v, t), g)| {
                *v *= Complex64::from_polar(1.0, -(t + a * g) * dt / hbar);
            }),
        }
        self.fft.inverse(psi);
    }

    fn observe(&self, t: f64, psi: &[Complex64]) -> Sample {
        let d = self.shape.len();
        let mut spectrum = psi.to_vec();
        self.fft.forward(&mut spectrum);
        let total_w: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum();
        let mut idx = vec![0; d];
        let mut mean_p = vec![0.0; d];
        let mut kin = 0.0;
        for (flat, v) in spectrum.iter().enumerate() {
            let w = v.norm_sqr() / total_w;
            unravel(flat, &self.shape, &mut idx);
            for a in 0..d {
                mean_p[a] += w * self.hbar * self.ks[a][idx[a]];
            }
            kin += w * self.kinetic[flat];
        }
        let norm: f64 = psi.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.dv;
        let mut mean_x = vec![0.0; d];
        let mut mean_force = vec![0.0; d];
        let mut pot = 0.0;
        for (flat, v) in psi.iter().enumerate() {
            let w = v.norm_sqr() * self.dv / norm;
            unravel(flat, &self.shape, &mut idx);
            for a in 0..d {
                mean_x[a] += w * self.axes[a].point(idx[a]);
                mean_force[a] += w * self.force[a][flat];
            }
            pot += w * self.potential[flat];
        }
        Sample { t, norm, mean_x, mean_p, mean_force, energy: kin + pot }
    }

    /// Strang steps `e^{−iV dt/2ħ} e^{−iT dt/ħ} e^{−iV dt/2ħ}` with the drive
    /// sampled at each step midpoint.
    pub(crate) fn run(&self, s: &GridState, t0: f64, schedule: Schedule, drive: Option<&Drive>) -> Result<Trajectory> {
        schedule.validate()?;
        let dt = schedule.dt;
        self.check_edges(s)?;
        let mut psi = s.amplitudes().to_vec();
        let mut samples = vec![self.observe(t0, &psi)];
        let mut snapshots = vec![(0, s.clone())];
        for n in 0..schedule.steps {
            let t_mid = t0 + (n as f64 + 0.5) * dt;
            let (a, b) = drive.map_or((0.0, 0.0), |f| f(t_mid));
            self.check_stability(dt, a)?;
            self.kick(&mut psi, 0.5 * dt, b);
            self.drift(&mut psi, dt, a);
            self.kick(&mut psi, 0.5 * dt, b);
            let t = t0 + (n + 1) as f64 * dt;
            samples.push(self.observe(t, &psi));
            let last = n + 1 == schedule.steps;
            let keep = last || (schedule.stride > 0 && (n + 1) % schedule.stride == 0);
            let state = s.with_amplitudes(psi.clone());
            self.check_edges(&state)?;
            if keep {
                snapshots.push((n + 1, state));
            }
        }
        Ok(Trajectory { dt, samples, snapshots })
    }
}

/// `H_rel = Σ π_j²/2m_j + Π²/2m₀ + V(0, x_r)` with `Π = Σ π_j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeHamiltonian {
    pub masses: MassConfig,
    pub potential: PotentialSpec,
}

impl RelativeHamiltonian {
    pub fn new(masses: MassConfig, potential: PotentialSpec) -> Result<Self> {
        if masses.len() < 2 {
            return Err(QrfError::InvalidMasses("relative dynamics needs at least two particles".into()));
        }
        potential.validate(masses.len())?;
        Ok(Self { masses, potential })
    }

    /// `T(k) = ħ² (Σ k_j²/2m_j + (Σ k_j)²/2m₀)`.
    pub fn kinetic(&self, k: &[f64]) -> f64 {
        let h2 = self.masses.hbar().powi(2);
        let own: f64 = k.iter().enumerate().map(|(j, kj)| kj * kj / (2.0 * self.masses.mass(j + 1))).sum();
        let total: f64 = k.iter().sum();
        h2 * (own + total * total / (2.0 * self.masses.mass(0)))
    }

    pub fn frame(&self) -> CoordinateFrame {
        CoordinateFrame::relative_only(&self.masses)
    }

    fn engine(&self, axes: &[Axis]) -> Engine {
        Engine::new(
            axes,
            self.masses.hbar(),
            |k| self.kinetic(k),
            |x| self.potential.relative_value(x),
            |x| self.potential.relative_gradient(x),
        )
    }

    fn check_state(&self, s: &GridState) -> Result<()> {
        s.frame().expect(&self.frame())?;
        if s.masses().masses() != self.masses.masses() {
            return Err(QrfError::InvalidMasses("state and Hamiltonian disagree on the masses".into()));
        }
        Ok(())
    }

    /// `⟨H_rel⟩`.
    pub fn energy(&self, s: &GridState) -> Result<f64> {
        self.check_state(s)?;
        Ok(self.engine(s.axes()).observe(0.0, s.amplitudes()).energy)
    }

    /// `⟨p_rj⟩ = μ₀ⱼ (⟨π_j⟩/m_j + ⟨Π⟩/m₀)` from the canonical momentum means.
    pub fn relative_momenta(&self, mean_pi: &[f64]) -> Vec<f64> {
        let total: f64 = mean_pi.iter().sum();
        let m0 = self.masses.mass(0);
        mean_pi
            .iter()
            .enumerate()
            .map(|(i, p)| self.masses.reduced(i + 1) * (p / self.masses.mass(i + 1) + total / m0))
            .collect()
    }

    /// `⟨dp_rj/dt⟩ = μ₀ⱼ (F_j/m_j + Σ F/m₀)` with `F = −⟨∇V⟩`.
    pub fn relative_momentum_rates(&self, mean_force: &[f64]) -> Vec<f64> {
        self.relative_momenta(mean_force)
    }
}

/// Strang split-step evolution of a relative-frame grid state.
pub fn evolve_relative(h: &RelativeHamiltonian, s: &GridState, schedule: Schedule) -> Result<Trajectory> {
    h.check_state(s)?;
    h.engine(s.axes()).run(s, 0.0, schedule, None)
}

/// Evolution of an absolute-frame state under `Σ p_i²/2m_i + V(x)`.
pub fn evolve_absolute(
    masses: &MassConfig,
    potential: &PotentialSpec,
    s: &GridState,
    schedule: Schedule,
) -> Result<Trajectory> {
    potential.validate(masses.len())?;
    s.frame().expect(&CoordinateFrame::absolute(masses.len()))?;
    let h2 = masses.hbar().powi(2);
    let engine = Engine::new(
        s.axes(),
        masses.hbar(),
        |k| k.iter().enumerate().map(|(i, ki)| h2 * ki * ki / (2.0 * masses.mass(i))).sum(),
        |x| potential.absolute_value(x),
        |x| potential.absolute_gradient(x),
    );
    engine.run(s, 0.0, schedule, None)
}

/// Frame of the centre-of-mass coordinate alone.
pub fn cm_frame(masses: &MassConfig) -> CoordinateFrame {
    let row = nalgebra::DMatrix::from_fn(1, masses.len(), |_, i| masses.mass(i) / masses.total());
    CoordinateFrame::new(vec![CoordLabel::new("x_cm", "p_cm")], row).expect("one-row frame")
}

/// Free evolution of a centre-of-mass state with mass `M`.
pub fn evolve_cm(s: &GridState, schedule: Schedule) -> Result<Trajectory> {
    let masses = s.masses().clone();
    s.frame().expect(&cm_frame(&masses))?;
    let h2 = masses.hbar().powi(2);
    let total = masses.total();
    Engine::new(s.axes(), masses.hbar(), |k| h2 * k[0] * k[0] / (2.0 * total), |_| 0.0, |_| vec![0.0])
        .run(s, 0.0, schedule, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    /// `1 − |⟨ψ_abs(t)|ψ_cm(t) ψ_rel(t)⟩|`.
    pub infidelity: f64,
    /// Same quantity at `t = 0`, the resampling floor.
    pub initial_infidelity: f64,
}

struct Product<'a> {
    cm: &'a dyn Wavefunction,
    rel: &'a dyn Wavefunction,
    masses: &'a MassConfig,
}

impl Wavefunction for Product<'_> {
    fn dim(&self) -> usize {
        self.masses.len()
    }

    fn value(&self, x: &[f64]) -> Complex64 {
        let cm: f64 = x.iter().zip(self.masses.masses()).map(|(x, m)| x * m).sum::<f64>() / self.masses.total();
        let xr: Vec<f64> = x[1..].iter().map(|v| v - x[0]).collect();
        self.cm.value(&[cm]) * self.rel.value(&xr)
    }
}

fn sample_product(cm: &GridState, rel: &GridState, masses: &MassConfig, axes: &[Axis]) -> Result<GridState> {
    let (ci, ri) = (cm.interpolator(), rel.interpolator());
    let p = Product { cm: &ci, rel: &ri, masses };
    let (s, _) = GridState::sample(CoordinateFrame::absolute(masses.len()), masses.clone(), axes.to_vec(), |x| {
        p.value(x)
    })?;
    Ok(s)
}

/// Evolves `ψ_cm(x_cm) ψ_rel(x_r)` on an absolute grid and compares it with
/// the separately evolved factors.
pub fn factorization_check(
    h: &RelativeHamiltonian,
    cm: &GridState,
    rel: &GridState,
    absolute_axes: &[Axis],
    schedule: Schedule,
) -> Result<FactorizationReport> {
    let start = sample_product(cm, rel, &h.masses, absolute_axes)?;
    let abs = evolve_absolute(&h.masses, &h.potential, &start, schedule)?;
    let cm_t = evolve_cm(cm, schedule)?;
    let rel_t = evolve_relative(h, rel, schedule)?;
    let predicted = sample_product(cm_t.final_state(), rel_t.final_state(), &h.masses, absolute_axes)?;
    let infidelity = 1.0 - abs.final_state().inner_product(&predicted)?.norm();
    let initial = sample_product(cm, rel, &h.masses, absolute_axes)?;
    let initial_infidelity = 1.0 - start.inner_product(&initial)?.norm();
    Ok(FactorizationReport { infidelity, initial_infidelity })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiMoments {
    pub mean: f64,
    pub std: f64,
}

/// `⟨Π⟩` and `ΔΠ` from spectral sums of `ħ Σ k_j`.
pub fn pi_observable(s: &GridState) -> Result<PiMoments> {
    s.frame().expect(&CoordinateFrame::relative_only(s.masses()))?;
    let shape = s.shape();
    let ks: Vec<Vec<f64>> = s.axes().iter().map(|a| a.wavenumbers()).collect();
    let spectrum = s.spectrum();
    let total_w: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum();
    let mut idx = vec![0; shape.len()];
    let (mut m1, mut m2) = (0.0, 0.0);
    for (flat, v) in spectrum.iter().enumerate() {
        unravel(flat, &shape, &mut idx);
        let pi = s.hbar() * idx.iter().enumerate().map(|(a, &i)| ks[a][i]).sum::<f64>();
        let w = v.norm_sqr() / total_w;
        m1 += w * pi;
        m2 += w * pi * pi;
    }
    Ok(PiMoments { mean: m1, std: (m2 - m1 * m1).max(0.0).sqrt() })
}

/// Linear entropy of the axes in `keep` against the rest.
pub fn partition_entropy(s: &GridState, keep: &[usize]) -> Result<f64> {
    Ok(partial_trace(s, keep)?.linear_entropy())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EhrenfestReport {
    /// Interior sample times at which residuals were taken.
    pub times: Vec<f64>,
    /// `d⟨x_rj⟩/dt − ⟨p_rj⟩/μ₀ⱼ` per time and coordinate.
    pub velocity: Vec<Vec<f64>>,
    /// `μ₀ⱼ d²⟨x_rj⟩/dt² − ⟨dp_rj/dt⟩` per time and coordinate.
    pub acceleration: Vec<Vec<f64>>,
    pub max_velocity: f64,
    pub max_acceleration: f64,
}

fn max_abs(rows: &[Vec<f64>]) -> f64 {
    rows.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
}

/// Central-difference residuals of the relative Heisenberg equations.
pub fn ehrenfest_check(traj: &Trajectory, h: &RelativeHamiltonian) -> Result<EhrenfestReport> {
    let s = &traj.samples;
    if s.len() < 5 {
        return Err(QrfError::TrajectoryTooShort(s.len()));
    }
    let dt = traj.dt;
    let d = s[0].mean_x.len();
    let mut times = Vec::new();
    let mut velocity = Vec::new();
    let mut acceleration = Vec::new();
    for n in 1..s.len() - 1 {
        let pr = h.relative_momenta(&s[n].mean_p);
        let rate = h.relative_momentum_rates(&s[n].mean_force);
        let mut v = Vec::with_capacity(d);
        let mut a = Vec::with_capacity(d);
        for j in 0..d {
            let mu = h.masses.reduced(j + 1);
            let (xm, x0, xp) = (s[n - 1].mean_x[j], s[n].mean_x[j], s[n + 1].mean_x[j]);
            v.push((xp - xm) / (2.0 * dt) - pr[j] / mu);
            a.push(mu * (xp - 2.0 * x0 + xm) / (dt * dt) - rate[j]);
        }
        times.push(s[n].t);
        velocity.push(v);
        acceleration.push(a);
    }
    Ok(EhrenfestReport {
        max_velocity: max_abs(&velocity),
        max_acceleration: max_abs(&acceleration),
        times,
        velocity,
        acceleration,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RichardsonReport {
    /// `max |⟨x⟩_dt − ⟨x⟩_{dt/2}|` over the coarse sample times.
    pub coarse: f64,
    /// `max |⟨x⟩_{dt/2} − ⟨x⟩_{dt/4}|` over the same times.
    pub fine: f64,
    pub ratio: f64,
}

/// Self-convergence of `⟨x_r⟩(t)` under step halving; a ratio near 4 means
/// second order. Central-difference Ehrenfest residuals cannot show this:
/// the split step advances the means exactly like velocity Verlet, so they
/// vanish to rounding for every `dt`.
pub fn ehrenfest_richardson(h: &RelativeHamiltonian, s: &GridState, dt: f64, steps: usize) -> Result<RichardsonReport> {
    let runs: Vec<Trajectory> = (0..3)
        .map(|r| {
            let f = 1usize << r;
            evolve_relative(h, s, Schedule::new(dt / f as f64, steps * f))
        })
        .collect::<Result<_>>()?;
    let gap = |a: &Trajectory, b: &Trajectory, fa: usize, fb: usize| {
        (0..=steps)
            .flat_map(|n| a.samples[n * fa].mean_x.iter().zip(&b.samples[n * fb].mean_x).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    };
    let coarse = gap(&runs[0], &runs[1], 1, 2);
    let fine = gap(&runs[1], &runs[2], 2, 4);
    Ok(RichardsonReport { coarse, fine, ratio: coarse / fine })
}

/// Largest `|d⟨Π⟩/dt − Σ_j F_j|` by central differences.
pub fn pi_rate_residual(traj: &Trajectory) -> Result<f64> {
    let s = &traj.samples;
    if s.len() < 5 {
        return Err(QrfError::TrajectoryTooShort(s.len()));
    }
    let pi = |n: usize| s[n].mean_p.iter().sum::<f64>();
    Ok((1..s.len() - 1)
        .map(|n| {
            let fd = (pi(n + 1) - pi(n - 1)) / (2.0 * traj.dt);
            (fd - s[n].mean_force.iter().sum::<f64>()).abs()
        })
        .fold(0.0, f64::max))
}
