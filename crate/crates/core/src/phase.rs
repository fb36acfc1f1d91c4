//! The shift operator `S = Σ δ_i p_i`, its decompositions and `⟨e^{iS/ħ}⟩`.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QrfError, Result};
use crate::mass::MassConfig;
use crate::state::State;
use crate::transform::catalog;

/// Relative tolerance on `δ_cm` for the strict accessibility predicate.
pub const ACCESSIBILITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftDecomposition {
    pub delta: Vec<f64>,
    pub delta_cm: f64,
    pub basis: String,
    /// Momentum labels of the chosen basis, matching `coefficients`.
    pub labels: Vec<String>,
    pub coefficients: Vec<f64>,
    /// `‖Bᵀ c − δ‖∞`: how well the coefficients rebuild `Σ δ_i p_i`.
    pub reconstruction_error: f64,
    pub accessible: bool,
}

fn check_len(delta: &[f64], masses: &MassConfig) -> Result<()> {
    if delta.len() != masses.len() {
        return Err(QrfError::DimensionMismatch(format!(
            "{} displacements for {} particles",
            delta.len(),
            masses.len()
        )));
    }
    Ok(())
}

/// `δ_cm = Σ m_i δ_i / M`.
pub fn delta_cm(delta: &[f64], masses: &MassConfig) -> Result<f64> {
    check_len(delta, masses)?;
    Ok(delta.iter().zip(masses.masses()).map(|(d, m)| d * m).sum::<f64>() / masses.total())
}

/// Writes `Σ δ_i p_i` on the momenta of a catalog basis. With `P = B p`
/// the coefficients are `A δ`.
pub fn decompose_shift(delta: &[f64], masses: &MassConfig, basis: &str) -> Result<ShiftDecomposition> {
    check_len(delta, masses)?;
    let t = catalog::by_name(basis, masses)?;
    if !t.input().is_absolute() {
        return Err(QrfError::InvalidArgument(format!("basis `{basis}` does not start from absolute momenta")));
    }
    let d = DVector::from_column_slice(delta);
    let c = t.position_block() * &d;
    let rebuilt = t.momentum_block().transpose() * &c;
    let reconstruction_error = (rebuilt - &d).amax();
    let dcm = delta_cm(delta, masses)?;
    let scale = d.amax();
    Ok(ShiftDecomposition {
        delta: delta.to_vec(),
        delta_cm: dcm,
        basis: basis.to_string(),
        labels: t.output().labels().iter().map(|l| l.momentum.clone()).collect(),
        coefficients: c.iter().copied().collect(),
        reconstruction_error,
        accessible: dcm.abs() <= ACCESSIBILITY_TOLERANCE * scale,
    })
}

/// `δ − δ_cm (1, …, 1)`: the part of the shift that leaves the centre of mass alone.
pub fn relative_part(delta: &[f64], masses: &MassConfig) -> Result<Vec<f64>> {
    let dcm = delta_cm(delta, masses)?;
    Ok(delta.iter().map(|d| d - dcm).collect())
}

/// `⟨ψ| exp(i Σ δ_i p_i / ħ) |ψ⟩ = ⟨ψ(y)|ψ(y + F δ)⟩` in the state's frame.
pub fn shift_expectation(s: &State, delta: &[f64]) -> Result<Complex64> {
    check_len(delta, s.masses())?;
    let shift = -(s.frame().from_absolute() * DVector::from_column_slice(delta));
    let moved = s.translated(shift.as_slice())?;
    s.inner_product(&moved)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub delta: Vec<f64>,
    pub value: [f64; 2],
    pub modulus: f64,
    pub phase: f64,
    /// Same probe with the centre-of-mass part of the shift removed.
    pub relative_value: [f64; 2],
    pub decomposition: ShiftDecomposition,
    /// The phase survives when the centre of mass is left untouched.
    pub relative_access: bool,
}

/// Relative agreement needed between the full and relative-only probes.
pub const RELATIVE_ACCESS_TOLERANCE: f64 = 1e-3;

pub fn probe(s: &State, delta: &[f64], basis: &str) -> Result<ProbeReport> {
    let value = shift_expectation(s, delta)?;
    let rel = shift_expectation(s, &relative_part(delta, s.masses())?)?;
    let decomposition = decompose_shift(delta, s.masses(), basis)?;
    Ok(ProbeReport {
        delta: delta.to_vec(),
        value: [value.re, value.im],
        modulus: value.norm(),
        phase: value.arg(),
        relative_value: [rel.re, rel.im],
        relative_access: (value - rel).norm() <= RELATIVE_ACCESS_TOLERANCE * value.norm(),
        decomposition,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiForm {
    /// Coefficients on `(π_cm, π_j)`.
    pub exact: [f64; 2],
    /// Same with the centre-of-mass term dropped.
    pub truncated: [f64; 2],
    /// `m_j / M`, the relative size of the dropped term.
    pub truncation: f64,
}

/// `S = δ p_j = δ ((m_j/M) π_cm + π_j)` for a shift of particle `j` alone.
pub fn heavy_limit_pi_form(delta: f64, masses: &MassConfig, j: usize) -> Result<PiForm> {
    if j == 0 || j >= masses.len() {
        return Err(QrfError::IndexOutOfRange(format!("particle {j}")));
    }
    let mut d = vec![0.0; masses.len()];
    d[j] = delta;
    let dec = decompose_shift(&d, masses, "cm_relative")?;
    let exact = [dec.coefficients[0], dec.coefficients[j]];
    Ok(PiForm { exact, truncated: [0.0, exact[1]], truncation: masses.mass(j) / masses.total() })
}

/// Limit `m_2 → ∞` of the `(p_r1, p_r2)` coefficients of `2L p_1` for the
/// three-particle ordering (frame, probe, third).
pub fn heavy_third_coefficients(l: f64, masses: &MassConfig) -> Result<[f64; 2]> {
    if masses.len() != 3 {
        return Err(QrfError::InvalidMasses("three particles expected".into()));
    }
    let ratio = masses.mass(1) / masses.mass(0);
    Ok([2.0 * l * (1.0 + ratio), -2.0 * l * ratio])
}
