//! Exact backend: superpositions of (possibly correlated) Gaussian branches.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{QrfError, Result};
use crate::exponent::{cholesky, symmetrize, Exponent};
use crate::frame::CoordinateFrame;
use crate::mass::MassConfig;
use crate::state::Wavefunction;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// One Gaussian wavepacket
/// `ψ(x) = N exp(-¼ (x-a)ᵀ Σ⁻¹ (x-a) + i k·(x-a)/ħ)`, weighted by `coefficient`.
///
/// `Σ` is the covariance of `|ψ|²`; for axis-aligned packets it is
/// `diag(Δ²)`, so two equal packets displaced by `δ` overlap as
/// `exp(-δ²/8Δ²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBranch {
    pub coefficient: Complex64,
    pub centers: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub momentum_offsets: DVector<f64>,
}

impl GaussianBranch {
    pub fn new(
        coefficient: Complex64,
        centers: Vec<f64>,
        widths: Vec<f64>,
        momentum_offsets: Vec<f64>,
    ) -> Result<Self> {
        if widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(QrfError::InvalidBranch(format!("widths must be positive: {widths:?}")));
        }
        let cov = DMatrix::from_diagonal(&DVector::from_iterator(
            widths.len(),
            widths.iter().map(|w| w * w),
        ));
        Self::with_covariance(coefficient, centers, cov, momentum_offsets)
    }

    pub fn with_covariance(
        coefficient: Complex64,
        centers: Vec<f64>,
        covariance: DMatrix<f64>,
        momentum_offsets: Vec<f64>,
    ) -> Result<Self> {
        let n = centers.len();
        if covariance.shape() != (n, n) || momentum_offsets.len() != n {
            return Err(QrfError::InvalidBranch(format!(
                "inconsistent dimensions: {} centres, {:?} covariance, {} momenta",
                n,
                covariance.shape(),
                momentum_offsets.len()
            )));
        }
        if centers.iter().chain(momentum_offsets.iter()).any(|v| !v.is_finite())
            || !(coefficient.re.is_finite() && coefficient.im.is_finite())
        {
            return Err(QrfError::InvalidBranch("non-finite parameter".into()));
        }
        let covariance = symmetrize(covariance);
        cholesky(&covariance)
            .map_err(|_| QrfError::InvalidBranch("covariance is not positive definite".into()))?;
        Ok(Self {
            coefficient,
            centers: DVector::from_vec(centers),
            covariance,
            momentum_offsets: DVector::from_vec(momentum_offsets),
        })
    }

    pub fn dim(&self) -> usize {
        self.centers.len()
    }

    /// Standard deviation of `|ψ|²` along each coordinate axis.
    pub fn axis_widths(&self) -> Vec<f64> {
        self.covariance.diagonal().iter().map(|v| v.sqrt()).collect()
    }

    /// Normalised packet as an exponent (coefficient excluded).
    pub(crate) fn exponent(&self, hbar: f64) -> Exponent {
        let n = self.dim();
        let chol = cholesky(&self.covariance).expect("validated at construction");
        let precision = chol.inverse();
        let ln_det: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        Exponent {
            origin: self.centers.clone(),
            quad: symmetrize(precision * 0.5),
            lin: self.momentum_offsets.map(|k| Complex64::new(0.0, k / hbar)),
            constant: Complex64::new(-0.25 * n as f64 * LN_2PI - 0.25 * ln_det, 0.0),
        }
    }

    /// Image under the point transformation `y = A x`.
    pub(crate) fn transformed(&self, a: &DMatrix<f64>, a_inv_t: &DMatrix<f64>) -> Result<Self> {
        Self::with_covariance(
            self.coefficient,
            (a * &self.centers).as_slice().to_vec(),
            a * &self.covariance * a.transpose(),
            (a_inv_t * &self.momentum_offsets).as_slice().to_vec(),
        )
    }

    pub(crate) fn translated(&self, shift: &DVector<f64>) -> Self {
        Self { centers: &self.centers + shift, ..self.clone() }
    }
}

/// Full first and second moments of a state in its own frame coordinates.
#[derive(Debug, Clone)]
pub struct StateMoments {
    pub mean_x: DVector<f64>,
    pub cov_x: DMatrix<f64>,
    pub mean_p: DVector<f64>,
    pub cov_p: DMatrix<f64>,
    /// `C(x_i, p_j) = ⟨(x_i p_j + p_j x_i)/2⟩ - ⟨x_i⟩⟨p_j⟩`.
    pub cov_xp: DMatrix<f64>,
}

/// Normalised superposition of Gaussian branches in a given frame.
#[derive(Debug, Clone)]
pub struct GaussianSuperposition {
    frame: CoordinateFrame,
    branches: Vec<GaussianBranch>,
    masses: MassConfig,
}

impl GaussianSuperposition {
    /// Builds and normalises the state using all pairwise branch overlaps.
    pub fn new(
        frame: CoordinateFrame,
        masses: MassConfig,
        branches: Vec<GaussianBranch>,
    ) -> Result<Self> {
        let state = Self::unnormalized(frame, masses, branches)?;
        let norm2 = state.norm_squared()?;
        if !(norm2.is_finite() && norm2 > 1e-300) {
            return Err(QrfError::InvalidBranch(format!("superposition has norm² {norm2}")));
        }
        let scale = 1.0 / norm2.sqrt();
        let mut state = state;
        for b in &mut state.branches {
            b.coefficient *= scale;
        }
        Ok(state)
    }

    pub(crate) fn unnormalized(
        frame: CoordinateFrame,
        masses: MassConfig,
        branches: Vec<GaussianBranch>,
    ) -> Result<Self> {
        if branches.is_empty() {
            return Err(QrfError::InvalidBranch("no branches".into()));
        }
        if frame.n_particles() != masses.len() {
            return Err(QrfError::DimensionMismatch(format!(
                "frame over {} particles, {} masses",
                frame.n_particles(),
                masses.len()
            )));
        }
        if let Some(b) = branches.iter().find(|b| b.dim() != frame.dim()) {
            return Err(QrfError::DimensionMismatch(format!(
                "branch of dimension {} in a frame of dimension {}",
                b.dim(),
                frame.dim()
            )));
        }
        Ok(Self { frame, branches, masses })
    }

    /// Product of axis-aligned packets in the absolute frame.
    pub fn product(masses: &MassConfig, centers: &[f64], widths: &[f64]) -> Result<Self> {
        let n = masses.len();
        let branch = GaussianBranch::new(
            Complex64::new(1.0, 0.0),
            centers.to_vec(),
            widths.to_vec(),
            vec![0.0; n],
        )?;
        Self::new(CoordinateFrame::absolute(n), masses.clone(), vec![branch])
    }

    pub fn frame(&self) -> &CoordinateFrame {
        &self.frame
    }

    pub fn masses(&self) -> &MassConfig {
        &self.masses
    }

    pub fn hbar(&self) -> f64 {
        self.masses.hbar()
    }

    pub fn branches(&self) -> &[GaussianBranch] {
        &self.branches
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub(crate) fn exponents(&self) -> Vec<Exponent> {
        self.branches.iter().map(|b| b.exponent(self.hbar())).collect()
    }

    /// `⟨a|b⟩` for unit-coefficient packets `a`, `b`.
    pub(crate) fn pair_overlap(a: &Exponent, b: &Exponent) -> Result<Complex64> {
        a.conj().mul(b).integrate()
    }

    pub fn norm_squared(&self) -> Result<f64> {
        Ok(self.inner_product_unchecked(self)?.re)
    }

    fn inner_product_unchecked(&self, other: &Self) -> Result<Complex64> {
        let ea = self.exponents();
        let eb = other.exponents();
        let mut acc = Complex64::new(0.0, 0.0);
        for (ba, xa) in self.branches.iter().zip(&ea) {
            for (bb, xb) in other.branches.iter().zip(&eb) {
                acc += ba.coefficient.conj() * bb.coefficient * Self::pair_overlap(xa, xb)?;
            }
        }
        Ok(acc)
    }

    /// `⟨self|other⟩` in closed form.
    pub fn inner_product(&self, other: &Self) -> Result<Complex64> {
        other.frame.expect(&self.frame)?;
        if self.masses != other.masses {
            return Err(QrfError::InvalidMasses("inner product of states with different masses".into()));
        }
        self.inner_product_unchecked(other)
    }

    /// The state displaced by `shift` in frame coordinates, `ψ(y - shift)`.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim() {
            return Err(QrfError::DimensionMismatch(format!(
                "shift of length {} in a {}-dimensional frame",
                shift.len(),
                self.dim()
            )));
        }
        let v = DVector::from_column_slice(shift);
        Ok(Self {
            branches: self.branches.iter().map(|b| b.translated(&v)).collect(),
            ..self.clone()
        })
    }

    pub(crate) fn with_parts(
        &self,
        frame: CoordinateFrame,
        branches: Vec<GaussianBranch>,
    ) -> Result<Self> {
        Self::unnormalized(frame, self.masses.clone(), branches)
    }

    /// A single branch, renormalised on its own.
    pub fn branch_state(&self, index: usize) -> Result<Self> {
        let b = self
            .branches
            .get(index)
            .ok_or_else(|| QrfError::IndexOutOfRange(format!("branch {index}")))?;
        let mut b = b.clone();
        b.coefficient = Complex64::new(1.0, 0.0);
        Self::new(self.frame.clone(), self.masses.clone(), vec![b])
    }

    /// Mean, covariance and cross covariance of positions and momenta.
    pub fn moments(&self) -> Result<StateMoments> {
        let n = self.dim();
        let hbar = self.hbar();
        let reference = self.branches[0].centers.clone();
        let exps = self.exponents();
        let precisions: Vec<DMatrix<f64>> = exps.iter().map(|e| e.quad.clone()).collect();
        let i_hbar = Complex64::new(0.0, hbar);

        let mut norm = Complex64::new(0.0, 0.0);
        let mut ex = DVector::<Complex64>::zeros(n);
        let mut exx = DMatrix::<Complex64>::zeros(n, n);
        let mut ep = DVector::<Complex64>::zeros(n);
        let mut epp = DMatrix::<Complex64>::zeros(n, n);
        let mut exp_ = DMatrix::<Complex64>::zeros(n, n);

        for (a, (ba, xa)) in self.branches.iter().zip(&exps).enumerate() {
            for (b, (bb, xb)) in self.branches.iter().zip(&exps).enumerate() {
                let pair = xa.conj().mul(xb);
                let m = pair.moments()?;
                let w = ba.coefficient.conj() * bb.coefficient * m.integral;
                let origin = &pair.origin;
                let s = (origin - &reference).map(|v| Complex64::new(v, 0.0));
                let qa = precisions[a].map(|v| Complex64::new(v, 0.0));
                let qb = precisions[b].map(|v| Complex64::new(v, 0.0));
                // gradient of log ψ: g(z) = -Q z + h with h = -Q (origin - a) + i k / ħ
                let ta = (origin - &ba.centers).map(|v| Complex64::new(v, 0.0));
                let tb = (origin - &bb.centers).map(|v| Complex64::new(v, 0.0));
                let ha = -(&qa * ta) + ba.momentum_offsets.map(|k| Complex64::new(0.0, k / hbar));
                let hb = -(&qb * tb) + bb.momentum_offsets.map(|k| Complex64::new(0.0, k / hbar));
                let ha_c = ha.map(|v| v.conj());

                norm += w;
                ex += (&m.mean + &s) * w;
                exx += (&m.second + &m.mean * s.transpose() + &s * m.mean.transpose()
                    + &s * s.transpose())
                    * w;
                let eg_b = -(&qb * &m.mean) + &hb;
                ep += &eg_b * (-i_hbar * w);
                let e_ga_gb = &qa * &m.second * qb.transpose()
                    - &qa * &m.mean * hb.transpose()
                    - &ha_c * (m.mean.transpose() * qb.transpose())
                    + &ha_c * hb.transpose();
                epp += e_ga_gb * (w * hbar * hbar);
                let e_z_gb = -(&m.second * qb.transpose()) + &m.mean * hb.transpose();
                exp_ += (e_z_gb + &s * eg_b.transpose()) * (-i_hbar * w);
            }
        }
        let norm = norm.re;
        let mean_rel = ex.map(|v| v.re / norm);
        let mean_x = &reference + &mean_rel;
        let cov_x = symmetrize(exx.map(|v| v.re / norm) - &mean_rel * mean_rel.transpose());
        let mean_p = ep.map(|v| v.re / norm);
        let cov_p = symmetrize(epp.map(|v| v.re / norm) - &mean_p * mean_p.transpose());
        let cov_xp = exp_.map(|v| v.re / norm) - &mean_rel * mean_p.transpose();
        Ok(StateMoments { mean_x, cov_x, mean_p, cov_p, cov_xp })
    }
}

impl Wavefunction for GaussianSuperposition {
    fn dim(&self) -> usize {
        self.frame.dim()
    }

    fn value(&self, x: &[f64]) -> Complex64 {
        let hbar = self.hbar();
        self.branches
            .iter()
            .map(|b| b.coefficient * b.exponent(hbar).value(x))
            .sum()
    }
}
