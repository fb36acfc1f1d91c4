//! Closed-form results for two-branch and product Gaussian states.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QrfError, Result};
use crate::frame::CoordinateFrame;
use crate::gaussian::{GaussianBranch, GaussianSuperposition};
use crate::mass::MassConfig;
use crate::transform::catalog;

/// Largest accepted linear entropy; `arctanh` diverges at ½.
pub const ENTROPY_CAP: f64 = 0.5 * (1.0 - 1e-12);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPairDiagnostics {
    pub alpha: f64,
    pub overlap: f64,
    pub purity: f64,
    pub entanglement: f64,
}

/// `α = δ² / 8Δ²`.
pub fn alpha(delta: f64, width: f64) -> Result<f64> {
    if !(width > 0.0) {
        return Err(QrfError::InvalidArgument(format!("width {width} must be positive")));
    }
    Ok(delta * delta / (8.0 * width * width))
}

fn check_alpha(a: f64) -> Result<()> {
    if !(a >= 0.0) {
        return Err(QrfError::InvalidArgument(format!("alpha {a} must be non-negative")));
    }
    Ok(())
}

/// Linear entropy `½ tanh² α` of one particle of the two-branch state.
pub fn two_branch_entropy(a: f64) -> Result<f64> {
    check_alpha(a)?;
    Ok(0.5 * a.tanh().powi(2))
}

pub fn two_branch_purity(a: f64) -> Result<f64> {
    Ok(1.0 - two_branch_entropy(a)?)
}

pub fn branch_pair(delta: f64, width: f64) -> Result<BranchPairDiagnostics> {
    let a = alpha(delta, width)?;
    let entanglement = two_branch_entropy(a)?;
    Ok(BranchPairDiagnostics { alpha: a, overlap: (-a).exp(), purity: 1.0 - entanglement, entanglement })
}

/// Purity of `Tr_cm` applied to a product of packets with widths `Δ0`, `Δ1`.
pub fn internal_purity(m0: f64, m1: f64, d0: f64, d1: f64) -> Result<f64> {
    if !(m0 > 0.0 && m1 > 0.0 && d0 > 0.0 && d1 > 0.0) {
        return Err(QrfError::InvalidArgument("masses and widths must be positive".into()));
    }
    let num = (m0 + m1) * d0 * d1;
    let den = ((m0 * m0 * d0 * d0 + m1 * m1 * d1 * d1) * (d0 * d0 + d1 * d1)).sqrt();
    Ok(num / den)
}

/// `Δx1 / Δx_r1` as a function of the linear entropy `E`.
pub fn dispersion_ratio(e: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&e) {
        return Err(QrfError::InvalidArgument(format!("entropy {e} outside [0, 1/2)")));
    }
    let s = (2.0 * e.min(ENTROPY_CAP)).sqrt();
    Ok((0.5 + (1.0 + s) * s.atanh() / 2.0).sqrt())
}

/// Same ratio written in terms of `α`.
pub fn dispersion_ratio_alpha(a: f64) -> Result<f64> {
    check_alpha(a)?;
    Ok((0.5 + a * (1.0 + a.tanh()) / 2.0).sqrt())
}

/// `(E, ratio)` on `samples` evenly spaced entropies in `[0, e_max]`.
pub fn dispersion_curve(samples: usize, e_max: f64) -> Result<Vec<(f64, f64)>> {
    if samples < 2 {
        return Err(QrfError::InvalidArgument("need at least two samples".into()));
    }
    (0..samples)
        .map(|i| {
            let e = e_max * i as f64 / (samples - 1) as f64;
            dispersion_ratio(e).map(|r| (e, r))
        })
        .collect()
}

/// `(|x0⟩|x1⟩ + e^{iφ}|x0+δ0⟩|x1+δ1⟩)/norm` with packets of the given widths.
pub fn two_branch_state(
    masses: &MassConfig,
    centers: [f64; 2],
    shifts: [f64; 2],
    widths: [f64; 2],
    phase: f64,
) -> Result<GaussianSuperposition> {
    if masses.len() != 2 {
        return Err(QrfError::InvalidMasses("two-branch state needs two particles".into()));
    }
    let b0 = GaussianBranch::new(Complex64::new(1.0, 0.0), centers.to_vec(), widths.to_vec(), vec![0.0; 2])?;
    let b1 = GaussianBranch::new(
        Complex64::from_polar(1.0, phase),
        vec![centers[0] + shifts[0], centers[1] + shifts[1]],
        widths.to_vec(),
        vec![0.0; 2],
    )?;
    GaussianSuperposition::new(CoordinateFrame::absolute(2), masses.clone(), vec![b0, b1])
}

/// `(Δx_r1, Δx1)` for the equal-mass state `|0⟩|0⟩ + |δ⟩|δ⟩`, from the
/// exact moments of the Gaussian backend.
pub fn variance_pair(delta: f64, width: f64) -> Result<(f64, f64)> {
    let masses = MassConfig::new(vec![1.0, 1.0])?;
    let s = two_branch_state(&masses, [0.0, 0.0], [delta, delta], [width, width], 0.0)?;
    let dx1 = s.moments()?.cov_x[(1, 1)].sqrt();
    let rel = catalog::cm_relative(&masses)?.apply_to_gaussian(&s)?;
    let dxr = rel.moments()?.cov_x[(1, 1)].sqrt();
    Ok((dxr, dx1))
}
