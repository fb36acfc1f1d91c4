use serde::{Deserialize, Serialize};

use super::{Engine, PotentialSpec, Schedule, Spline, Trajectory};
use crate::error::{QrfError, Result};
use crate::frame::CoordinateFrame;
use crate::grid::GridState;
use crate::mass::MassConfig;

/// Prescribed trajectory `x₀(t)` of a classical origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FramePath {
    /// `Σ c_n tⁿ`
    Polynomial { coefficients: Vec<f64> },
    Sampled { spline: Spline },
}

impl FramePath {
    pub fn at_rest() -> Self {
        FramePath::Polynomial { coefficients: vec![] }
    }

    /// `x₀(t) = ½ a t²`.
    pub fn uniform_acceleration(a: f64) -> Self {
        FramePath::Polynomial { coefficients: vec![0.0, 0.0, 0.5 * a] }
    }

    fn poly(c: &[f64], t: f64, order: usize) -> f64 {
        c.iter()
            .enumerate()
            .skip(order)
            .map(|(n, cn)| {
                let falling: f64 = (0..order).map(|k| (n - k) as f64).product();
                cn * falling * t.powi((n - order) as i32)
            })
            .sum()
    }

    pub fn position(&self, t: f64) -> f64 {
        match self {
            FramePath::Polynomial { coefficients } => Self::poly(coefficients, t, 0),
            FramePath::Sampled { spline } => spline.value(t),
        }
    }

    pub fn velocity(&self, t: f64) -> f64 {
        match self {
            FramePath::Polynomial { coefficients } => Self::poly(coefficients, t, 1),
            FramePath::Sampled { spline } => spline.derivative(t),
        }
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        match self {
            FramePath::Polynomial { coefficients } => Self::poly(coefficients, t, 2),
            FramePath::Sampled { spline } => spline.second_derivative(t),
        }
    }
}

/// `H′_ε = Σ p′²/2m + V − ½(1+ε) ẋ₀ P′ + ½(1−ε) M ẍ₀ X′` for particles
/// `1..=N` seen from an origin moving along `x₀(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalFrameHamiltonian {
    pub epsilon: f64,
    pub path: FramePath,
    /// Masses of the quantum particles.
    pub masses: MassConfig,
    /// Pair terms with index 0 standing for the classical origin.
    pub potential: PotentialSpec,
}

impl ClassicalFrameHamiltonian {
    pub fn new(epsilon: f64, path: FramePath, masses: MassConfig, potential: PotentialSpec) -> Result<Self> {
        potential.validate(masses.len() + 1)?;
        Ok(Self { epsilon, path, masses, potential })
    }

    /// `(a(t), b(t))` multiplying `−ħΣk` and `Σ m_k x′_k`.
    fn drive(&self, t: f64) -> (f64, f64) {
        (0.5 * (1.0 + self.epsilon) * self.path.velocity(t), 0.5 * (1.0 - self.epsilon) * self.path.acceleration(t))
    }
}

pub fn evolve_classical_frame(h: &ClassicalFrameHamiltonian, s: &GridState, schedule: Schedule) -> Result<Trajectory> {
    s.frame().expect(&CoordinateFrame::classical(h.masses.len()))?;
    if s.masses().masses() != h.masses.masses() {
        return Err(QrfError::InvalidMasses("state and Hamiltonian disagree on the masses".into()));
    }
    let hbar = h.masses.hbar();
    let m = h.masses.masses().to_vec();
    let engine = Engine::new(
        s.axes(),
        hbar,
        |k| k.iter().zip(&m).map(|(k, m)| hbar * hbar * k * k / (2.0 * m)).sum(),
        |x| h.potential.relative_value(x),
        |x| h.potential.relative_gradient(x),
    )
    .with_kinetic_drive(|k| -hbar * k.iter().sum::<f64>())
    .with_potential_drive(|x| x.iter().zip(&m).map(|(x, m)| x * m).sum());
    let drive = |t: f64| h.drive(t);
    engine.run(s, 0.0, schedule, Some(&drive))
}

/// Largest `|m_k⟨ẍ′_k⟩ − ⟨−∂V/∂x′_k⟩ + m_k ẍ₀|` by central differences.
pub fn classical_heisenberg_check(traj: &Trajectory, h: &ClassicalFrameHamiltonian) -> Result<f64> {
    let s = &traj.samples;
    if s.len() < 5 {
        return Err(QrfError::TrajectoryTooShort(s.len()));
    }
    let dt = traj.dt;
    let mut worst = 0.0f64;
    for n in 1..s.len() - 1 {
        let acc0 = h.path.acceleration(s[n].t);
        for k in 0..h.masses.len() {
            let m = h.masses.mass(k);
            let xdd = (s[n + 1].mean_x[k] - 2.0 * s[n].mean_x[k] + s[n - 1].mean_x[k]) / (dt * dt);
            worst = worst.max((m * xdd - s[n].mean_force[k] + m * acc0).abs());
        }
    }
    Ok(worst)
}
