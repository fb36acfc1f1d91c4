//! Particle masses and the mass ratios derived from them.

use serde::{Deserialize, Serialize};

use crate::error::{QrfError, Result};

/// Masses `m_0 .. m_N` of a 1D system, in natural units with configurable ħ.
///
/// Particle 0 is always the one promoted to reference frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MassConfig {
    masses: Vec<f64>,
    hbar: f64,
}

impl MassConfig {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        Self::with_hbar(masses, 1.0)
    }

    pub fn with_hbar(masses: Vec<f64>, hbar: f64) -> Result<Self> {
        if masses.is_empty() {
            return Err(QrfError::InvalidMasses("at least one mass is required".into()));
        }
        if let Some((i, m)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !(m.is_finite() && **m > 0.0))
        {
            return Err(QrfError::InvalidMasses(format!("m{i} = {m} is not positive")));
        }
        if !(hbar.is_finite() && hbar > 0.0) {
            return Err(QrfError::InvalidMasses(format!("hbar = {hbar} is not positive")));
        }
        Ok(Self { masses, hbar })
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.masses[i]
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    /// Number of particles, `N + 1`.
    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// `N`, the number of particles other than the reference.
    pub fn n_relative(&self) -> usize {
        self.masses.len() - 1
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Reduced mass `μ_0j = m_0 m_j / (m_0 + m_j)`.
    pub fn reduced(&self, j: usize) -> f64 {
        let (m0, mj) = (self.masses[0], self.masses[j]);
        m0 * mj / (m0 + mj)
    }

    /// `γ = m_0 m_1 m_2 / (M μ_01 μ_02)`, defined for three particles only.
    pub fn gamma(&self) -> Result<f64> {
        if self.masses.len() != 3 {
            return Err(QrfError::InvalidMasses(format!(
                "gamma needs exactly three masses, got {}",
                self.masses.len()
            )));
        }
        let (m0, m1, m2) = (self.masses[0], self.masses[1], self.masses[2]);
        // Same value as m0 m1 m2 / (M μ01 μ02) with the μ's cancelled.
        Ok((m0 + m1) * (m0 + m2) / (self.total() * m0))
    }

    /// A copy with particles reordered so that `order[k]` becomes particle `k`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.len()];
        if order.len() != self.len() {
            return Err(QrfError::DimensionMismatch(format!(
                "permutation of length {} for {} particles",
                order.len(),
                self.len()
            )));
        }
        for &o in order {
            if o >= self.len() || seen[o] {
                return Err(QrfError::InvalidArgument(format!("{order:?} is not a permutation")));
            }
            seen[o] = true;
        }
        Self::with_hbar(order.iter().map(|&o| self.masses[o]).collect(), self.hbar)
    }
}
