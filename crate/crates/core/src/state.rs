//! Backend-agnostic view of a pure state.

use num_complex::Complex64;

use crate::error::Result;
use crate::frame::CoordinateFrame;
use crate::gaussian::{GaussianSuperposition, StateMoments};
use crate::grid::GridState;
use crate::mass::MassConfig;

/// Anything that can be evaluated pointwise as a wavefunction.
pub trait Wavefunction: Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Complex64;
}

/// A pure state on either backend.
#[derive(Debug, Clone)]
pub enum State {
    Gaussian(GaussianSuperposition),
    Grid(GridState),
}

impl State {
    pub fn frame(&self) -> &CoordinateFrame {
        match self {
            State::Gaussian(s) => s.frame(),
            State::Grid(s) => s.frame(),
        }
    }

    pub fn masses(&self) -> &MassConfig {
        match self {
            State::Gaussian(s) => s.masses(),
            State::Grid(s) => s.masses(),
        }
    }

    pub fn moments(&self) -> Result<StateMoments> {
        match self {
            State::Gaussian(s) => s.moments(),
            State::Grid(s) => s.moments(),
        }
    }

    /// `ψ(y - shift)` in frame coordinates.
    pub fn translated(&self, shift: &[f64]) -> Result<State> {
        Ok(match self {
            State::Gaussian(s) => State::Gaussian(s.translated(shift)?),
            State::Grid(s) => State::Grid(s.translated(shift)?),
        })
    }

    pub fn inner_product(&self, other: &State) -> Result<Complex64> {
        match (self, other) {
            (State::Gaussian(a), State::Gaussian(b)) => a.inner_product(b),
            (State::Grid(a), State::Grid(b)) => a.inner_product(b),
            (State::Gaussian(a), State::Grid(b)) => b.inner_product_with(a).map(|v| v.conj()),
            (State::Grid(a), State::Gaussian(b)) => a.inner_product_with(b),
        }
    }
}

impl From<GaussianSuperposition> for State {
    fn from(s: GaussianSuperposition) -> Self {
        State::Gaussian(s)
    }
}

impl From<GridState> for State {
    fn from(s: GridState) -> Self {
        State::Grid(s)
    }
}
