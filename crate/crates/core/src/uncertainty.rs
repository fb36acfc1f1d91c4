//! Linear observables, their moments and commutator bounds.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{QrfError, Result};
use crate::frame::CoordinateFrame;
use crate::gaussian::StateMoments;
use crate::mass::MassConfig;
use crate::state::State;

/// `a·x + b·p` over the absolute positions and momenta.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    pub label: String,
    pub position: DVector<f64>,
    pub momentum: DVector<f64>,
}

impl Observable {
    pub fn position(label: impl Into<String>, a: DVector<f64>) -> Self {
        let n = a.len();
        Self { label: label.into(), position: a, momentum: DVector::zeros(n) }
    }

    pub fn momentum(label: impl Into<String>, b: DVector<f64>) -> Self {
        let n = b.len();
        Self { label: label.into(), position: DVector::zeros(n), momentum: b }
    }

    /// Looks up a catalog label: `x{i}`, `p{i}`, `x_cm`, `p_cm`, `x_r{j}`,
    /// `pi_{j}`, `p_r{j}`, `Pi`, and `q1`, `q2` for three particles.
    pub fn parse(label: &str, masses: &MassConfig) -> Result<Self> {
        let n = masses.len();
        let total = masses.total();
        let unit = |i: usize| {
            let mut v = DVector::zeros(n);
            v[i] = 1.0;
            v
        };
        let index = |s: &str, lo: usize| -> Option<usize> {
            s.parse::<usize>().ok().filter(|&i| i >= lo && i < n)
        };
        let unknown = || QrfError::UnknownObservable(label.to_string());
        let ones = DVector::from_element(n, 1.0);
        let obs = if label == "x_cm" {
            Self::position(label, DVector::from_iterator(n, masses.masses().iter().map(|m| m / total)))
        } else if label == "p_cm" {
            Self::momentum(label, ones)
        } else if label == "Pi" {
            let mut b = ones * (masses.mass(0) / total);
            b[0] -= 1.0;
            Self::momentum(label, b)
        } else if let Some(j) = label.strip_prefix("x_r") {
            let j = index(j, 1).ok_or_else(unknown)?;
            Self::position(label, unit(j) - unit(0))
        } else if let Some(j) = label.strip_prefix("pi_") {
            let j = index(j, 1).ok_or_else(unknown)?;
            Self::momentum(label, unit(j) - ones * (masses.mass(j) / total))
        } else if let Some(j) = label.strip_prefix("p_r") {
            let j = index(j, 1).ok_or_else(unknown)?;
            Self::momentum(label, crate::transform::p_rel_coefficients(masses, j)?)
        } else if let Some(j) = label.strip_prefix('q') {
            if n != 3 {
                return Err(unknown());
            }
            let j = index(j, 1).ok_or_else(unknown)?;
            let t = crate::transform::catalog::qpr3(masses)?;
            Self::position(label, t.position_block().row(j).transpose())
        } else if let Some(i) = label.strip_prefix('x') {
            Self::position(label, unit(index(i, 0).ok_or_else(unknown)?))
        } else if let Some(i) = label.strip_prefix('p') {
            Self::momentum(label, unit(index(i, 0).ok_or_else(unknown)?))
        } else {
            return Err(unknown());
        };
        Ok(obs)
    }

    /// `[A, B] / iħ`.
    pub fn commutator(&self, other: &Observable) -> f64 {
        self.position.dot(&other.momentum) - other.position.dot(&self.momentum)
    }
}

/// Every catalog label available for `masses`.
pub fn catalog_labels(masses: &MassConfig) -> Vec<String> {
    let n = masses.len();
    let mut labels: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    labels.extend((0..n).map(|i| format!("p{i}")));
    labels.push("x_cm".into());
    labels.push("p_cm".into());
    for j in 1..n {
        labels.push(format!("x_r{j}"));
        labels.push(format!("pi_{j}"));
        labels.push(format!("p_r{j}"));
    }
    labels.push("Pi".into());
    if n == 3 {
        labels.push("q1".into());
        labels.push("q2".into());
    }
    labels
}

/// Means, symmetrised covariances and commutator bounds of a set of observables.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MomentReport {
    pub labels: Vec<String>,
    pub means: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Robertson bound `½|⟨[A, B]⟩|` per pair.
    pub bounds: Vec<Vec<f64>>,
}

impl MomentReport {
    pub fn index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| QrfError::UnknownObservable(label.to_string()))
    }

    pub fn variance(&self, label: &str) -> Result<f64> {
        let i = self.index(label)?;
        Ok(self.covariance[i][i])
    }

    pub fn std(&self, label: &str) -> Result<f64> {
        self.variance(label).map(f64::sqrt)
    }

    pub fn cov(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.covariance[self.index(a)?][self.index(b)?])
    }

    pub fn mean(&self, label: &str) -> Result<f64> {
        Ok(self.means[self.index(label)?])
    }

    /// Smallest `ΔA ΔB − bound` over all pairs.
    pub fn robertson_margin(&self) -> f64 {
        let n = self.labels.len();
        let mut worst = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let prod = (self.covariance[i][i].max(0.0) * self.covariance[j][j].max(0.0)).sqrt();
                worst = worst.min(prod - self.bounds[i][j]);
            }
        }
        worst
    }
}

/// Observable coefficients expressed on a square frame's own coordinates:
/// `a·x = (F^{-T} a)·y` and `b·p = (F b)·P`.
fn to_frame(frame: &CoordinateFrame, obs: &Observable) -> Result<(DVector<f64>, DVector<f64>)> {
    if !frame.is_square() {
        return Err(QrfError::InvalidFrame(format!(
            "moments of absolute observables need a full frame, got [{frame}]"
        )));
    }
    let f = frame.from_absolute();
    let f_inv_t = f
        .clone()
        .try_inverse()
        .ok_or_else(|| QrfError::Linalg("singular frame map".into()))?
        .transpose();
    Ok((f_inv_t * &obs.position, f * &obs.momentum))
}

/// Moments of catalog observables from precomputed frame moments.
pub fn moments_from(
    frame: &CoordinateFrame,
    masses: &MassConfig,
    m: &StateMoments,
    labels: &[String],
) -> Result<MomentReport> {
    let obs = labels.iter().map(|l| Observable::parse(l, masses)).collect::<Result<Vec<_>>>()?;
    let coeffs = obs.iter().map(|o| to_frame(frame, o)).collect::<Result<Vec<_>>>()?;
    let means = coeffs.iter().map(|(a, b)| a.dot(&m.mean_x) + b.dot(&m.mean_p)).collect();
    let cov = |i: usize, j: usize| {
        let (ai, bi) = &coeffs[i];
        let (aj, bj) = &coeffs[j];
        (ai.transpose() * &m.cov_x * aj)[0]
            + (bi.transpose() * &m.cov_p * bj)[0]
            + (ai.transpose() * &m.cov_xp * bj)[0]
            + (aj.transpose() * &m.cov_xp * bi)[0]
    };
    let n = obs.len();
    let covariance = (0..n).map(|i| (0..n).map(|j| cov(i, j)).collect()).collect();
    let hbar = masses.hbar();
    let bounds = (0..n)
        .map(|i| (0..n).map(|j| 0.5 * hbar * obs[i].commutator(&obs[j]).abs()).collect())
        .collect();
    Ok(MomentReport { labels: labels.to_vec(), means, covariance, bounds })
}

pub fn moments(s: &State, labels: &[String]) -> Result<MomentReport> {
    moments_from(s.frame(), s.masses(), &s.moments()?, labels)
}

/// `Δx_rj Δp_rk ≥ bound`: `ħ/2` for `j = k`, `(ħ/2) m_k/(m0+m_k)` otherwise.
pub fn relative_bound(j: usize, k: usize, masses: &MassConfig) -> Result<f64> {
    let n = masses.len();
    if j == 0 || k == 0 || j >= n || k >= n {
        return Err(QrfError::IndexOutOfRange(format!("relative pair ({j}, {k}) with {n} particles")));
    }
    let half = 0.5 * masses.hbar();
    if j == k {
        Ok(half)
    } else {
        Ok(half * masses.mass(k) / (masses.mass(0) + masses.mass(k)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub j: usize,
    pub k: usize,
    pub product: f64,
    pub bound: f64,
    pub margin: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
    pub min_margin: f64,
}

/// Tolerance below the bound still counted as satisfied.
pub const BOUND_SLACK: f64 = 1e-9;

/// Checks every `(x_rj, p_rk)` pair; violations are reported, not raised.
pub fn verify_bounds(s: &State) -> Result<BoundReport> {
    let masses = s.masses();
    let n = masses.len();
    let mut labels = Vec::new();
    for j in 1..n {
        labels.push(format!("x_r{j}"));
        labels.push(format!("p_r{j}"));
    }
    let report = moments(s, &labels)?;
    let mut checks = Vec::new();
    for j in 1..n {
        for k in 1..n {
            let product = report.std(&format!("x_r{j}"))? * report.std(&format!("p_r{k}"))?;
            let bound = relative_bound(j, k, masses)?;
            let margin = product - bound;
            checks.push(BoundCheck { j, k, product, bound, margin, satisfied: margin >= -BOUND_SLACK });
        }
    }
    let min_margin = checks.iter().map(|c| c.margin).fold(f64::INFINITY, f64::min);
    Ok(BoundReport { checks, min_margin })
}

/// Right-hand sides of the variance decompositions of `x_rj` and `p_rj`
/// in terms of absolute variances and covariances.
pub fn decomposition_rhs(abs: &MomentReport, masses: &MassConfig, j: usize) -> Result<(f64, f64)> {
    let (x0, xj) = ("x0".to_string(), format!("x{j}"));
    let (p0, pj) = ("p0".to_string(), format!("p{j}"));
    let x = abs.variance(&x0)? + abs.variance(&xj)? - 2.0 * abs.cov(&xj, &x0)?;
    let mu = masses.reduced(j);
    let (m0, mj) = (masses.mass(0), masses.mass(j));
    let p = mu * mu / (m0 * m0) * abs.variance(&p0)? + mu * mu / (mj * mj) * abs.variance(&pj)?
        - 2.0 * mu * mu * abs.cov(&pj, &p0)? / (mj * m0);
    Ok((x, p))
}

/// Commutator matrix `[A_i, B_k] / iħ` between two label sets.
pub fn commutator_matrix(masses: &MassConfig, rows: &[&str], cols: &[&str]) -> Result<DMatrix<f64>> {
    let r = rows.iter().map(|l| Observable::parse(l, masses)).collect::<Result<Vec<_>>>()?;
    let c = cols.iter().map(|l| Observable::parse(l, masses)).collect::<Result<Vec<_>>>()?;
    Ok(DMatrix::from_fn(r.len(), c.len(), |i, k| r[i].commutator(&c[k])))
}
