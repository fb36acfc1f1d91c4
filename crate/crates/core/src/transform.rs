//! Linear canonical transformations on stacked (positions, momenta).

use nalgebra::{DMatrix, DVector};

use crate::error::{QrfError, Result};
use crate::frame::{CoordLabel, CoordinateFrame};
use crate::gaussian::GaussianSuperposition;
use crate::grid::{unravel, Axis, GridState};
use crate::mass::MassConfig;
use crate::state::{State, Wavefunction};

/// Symplectic tolerance used by the constructor. Catalog entries are checked
/// against the tighter 1e-12 in tests.
const CONSTRUCTION_TOLERANCE: f64 = 1e-9;

/// Norm drift budget for grid resampling.
pub const GRID_NORM_BUDGET: f64 = 1e-6;

/// Image mass allowed to fall outside the target axes.
pub const CLIP_BUDGET: f64 = 1e-8;

/// `y = A x`, `P = B p` with `A Bᵀ = I`.
#[derive(Debug, Clone)]
pub struct LinearCanonicalTransform {
    name: String,
    position_block: DMatrix<f64>,
    momentum_block: DMatrix<f64>,
    input: CoordinateFrame,
    output: CoordinateFrame,
}

/// `‖S J Sᵀ − J‖∞` for `S = diag(A, B)`.
pub fn symplectic_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = DMatrix::zeros(2 * n, 2 * n);
    s.view_mut((0, 0), (n, n)).copy_from(a);
    s.view_mut((n, n), (n, n)).copy_from(b);
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    (&s * &j * s.transpose() - j).amax()
}

impl LinearCanonicalTransform {
    /// Builds a transform from `input`; the output frame carries `labels`
    /// and the composed absolute map `A · input.from_absolute`.
    pub fn new(
        name: impl Into<String>,
        position_block: DMatrix<f64>,
        momentum_block: DMatrix<f64>,
        input: CoordinateFrame,
        labels: Vec<CoordLabel>,
    ) -> Result<Self> {
        let n = input.dim();
        if position_block.shape() != (n, n) || momentum_block.shape() != (n, n) {
            return Err(QrfError::DimensionMismatch(format!(
                "blocks of a transform on a {n}-dimensional frame must be {n}x{n}"
            )));
        }
        let err = symplectic_error(&position_block, &momentum_block);
        if !(err < CONSTRUCTION_TOLERANCE) {
            return Err(QrfError::Linalg(format!("transform is not symplectic (error {err:e})")));
        }
        let output = CoordinateFrame::new(labels, &position_block * input.from_absolute())?;
        Ok(Self { name: name.into(), position_block, momentum_block, input, output })
    }

    /// Transform `input → output` between two frames sharing the same particles.
    pub fn between(name: impl Into<String>, input: &CoordinateFrame, output: &CoordinateFrame) -> Result<Self> {
        if !input.is_square() || !output.is_square() || input.n_particles() != output.n_particles() {
            return Err(QrfError::InvalidFrame("frames must be square over the same particles".into()));
        }
        let fin_inv = input
            .from_absolute()
            .clone()
            .try_inverse()
            .ok_or_else(|| QrfError::Linalg("singular frame map".into()))?;
        let a = output.from_absolute() * fin_inv;
        let b = a
            .clone()
            .try_inverse()
            .ok_or_else(|| QrfError::Linalg("singular transform".into()))?
            .transpose();
        Self::new(name, a, b, input.clone(), output.labels().to_vec())
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn position_block(&self) -> &DMatrix<f64> {
        &self.position_block
    }

    pub fn momentum_block(&self) -> &DMatrix<f64> {
        &self.momentum_block
    }

    pub fn input(&self) -> &CoordinateFrame {
        &self.input
    }

    pub fn output(&self) -> &CoordinateFrame {
        &self.output
    }

    pub fn dim(&self) -> usize {
        self.input.dim()
    }

    pub fn symplectic_error(&self) -> f64 {
        symplectic_error(&self.position_block, &self.momentum_block)
    }

    /// `(A⁻¹, B⁻¹) = (Bᵀ, Aᵀ)`.
    pub fn inverse(&self) -> Self {
        Self {
            name: format!("inverse({})", self.name),
            position_block: self.momentum_block.transpose(),
            momentum_block: self.position_block.transpose(),
            input: self.output.clone(),
            output: self.input.clone(),
        }
    }

    /// `self ∘ first`.
    pub fn after(&self, first: &LinearCanonicalTransform) -> Result<Self> {
        first.output.expect(&self.input)?;
        Ok(Self {
            name: format!("{}*{}", self.name, first.name),
            position_block: &self.position_block * &first.position_block,
            momentum_block: &self.momentum_block * &first.momentum_block,
            input: first.input.clone(),
            output: self.output.clone(),
        })
    }

    /// `Im [y_i, P_k] / ħ` over output coordinates, i.e. `A Bᵀ`.
    pub fn commutator_table(&self) -> DMatrix<f64> {
        &self.position_block * self.momentum_block.transpose()
    }

    pub fn apply(&self, s: &State) -> Result<State> {
        match s {
            State::Gaussian(g) => self.apply_to_gaussian(g).map(State::Gaussian),
            State::Grid(g) => {
                let axes = g.axes().to_vec();
                self.apply_to_grid(g, &axes).map(State::Grid)
            }
        }
    }

    pub fn apply_to_gaussian(&self, s: &GaussianSuperposition) -> Result<GaussianSuperposition> {
        s.frame().expect(&self.input)?;
        let branches = s
            .branches()
            .iter()
            .map(|b| b.transformed(&self.position_block, &self.momentum_block))
            .collect::<Result<Vec<_>>>()?;
        s.with_parts(self.output.clone(), branches)
    }

    /// Resamples `ψ̃(y) = |det A|^{-1/2} ψ(A⁻¹ y)` onto `target` by cubic
    /// B-spline interpolation of the source grid.
    pub fn apply_to_grid(&self, s: &GridState, target: &[Axis]) -> Result<GridState> {
        s.frame().expect(&self.input)?;
        if target.len() != self.dim() {
            return Err(QrfError::DimensionMismatch(format!(
                "{} target axes for a {}-dimensional transform",
                target.len(),
                self.dim()
            )));
        }
        let clipped = self.clipped_mass(s, target);
        if clipped >= CLIP_BUDGET {
            return Err(QrfError::SupportClipped { mass: clipped });
        }
        let interp = s.interpolator();
        let (out, drift) = self.sample_image(&interp, s.masses(), target)?;
        if drift > GRID_NORM_BUDGET {
            return Err(QrfError::NormDrift { drift, budget: GRID_NORM_BUDGET });
        }
        Ok(out)
    }

    /// Samples `|det A|^{-1/2} ψ(A⁻¹ y)` on `target` for any pointwise `ψ`
    /// given in the input frame, returning the renormalised image and `|1 - norm²|`.
    pub fn sample_image<W: Wavefunction + ?Sized>(
        &self,
        psi: &W,
        masses: &MassConfig,
        target: &[Axis],
    ) -> Result<(GridState, f64)> {
        let a_inv = self.momentum_block.transpose();
        let jac = self.position_block.determinant().abs().powf(-0.5);
        GridState::sample(self.output.clone(), masses.clone(), target.to_vec(), |y| {
            let x = &a_inv * DVector::from_column_slice(y);
            psi.value(x.as_slice()) * jac
        })
    }

    fn clipped_mass(&self, s: &GridState, target: &[Axis]) -> f64 {
        let shape = s.shape();
        let dv = s.cell_volume();
        let mut idx = vec![0; shape.len()];
        let mut x = vec![0.0; shape.len()];
        let mut clipped = 0.0;
        for (flat, amp) in s.amplitudes().iter().enumerate() {
            unravel(flat, &shape, &mut idx);
            for k in 0..shape.len() {
                x[k] = s.axes()[k].point(idx[k]);
            }
            let outside = (0..target.len()).any(|i| {
                let y: f64 = (0..x.len()).map(|k| self.position_block[(i, k)] * x[k]).sum();
                !target[i].contains(y)
            });
            if outside {
                clipped += amp.norm_sqr() * dv;
            }
        }
        clipped
    }
}

/// Builders for the transforms used throughout the crate. Every entry maps
/// out of the absolute frame.
pub mod catalog {
    use super::*;

    pub fn identity(frame: &CoordinateFrame) -> LinearCanonicalTransform {
        let n = frame.dim();
        LinearCanonicalTransform {
            name: "identity".into(),
            position_block: DMatrix::identity(n, n),
            momentum_block: DMatrix::identity(n, n),
            input: frame.clone(),
            output: frame.clone(),
        }
    }

    /// `(x_cm, x_rj)` with conjugates `(p_cm, π_j)`.
    pub fn cm_relative(masses: &MassConfig) -> Result<LinearCanonicalTransform> {
        let n = masses.len();
        let total = masses.total();
        let target = CoordinateFrame::cm_relative(masses);
        let a = target.from_absolute().clone();
        let mut b = DMatrix::zeros(n, n);
        for i in 0..n {
            b[(0, i)] = 1.0;
        }
        for j in 1..n {
            for i in 0..n {
                b[(j, i)] = -masses.mass(j) / total;
            }
            b[(j, j)] += 1.0;
        }
        LinearCanonicalTransform::new(
            "cm_relative",
            a,
            b,
            CoordinateFrame::absolute(n),
            target.labels().to_vec(),
        )
    }

    /// Inverse of [`cm_relative`], written out from `x_j = x_cm + x_rj − Σ m_k x_rk / M`.
    pub fn cm_relative_inverse(masses: &MassConfig) -> Result<LinearCanonicalTransform> {
        let n = masses.len();
        let total = masses.total();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, 0)] = 1.0;
            for k in 1..n {
                a[(i, k)] = -masses.mass(k) / total;
            }
            if i > 0 {
                a[(i, i)] += 1.0;
            }
        }
        let forward = cm_relative(masses)?;
        let b = forward.position_block().transpose();
        LinearCanonicalTransform::new(
            "cm_relative_inverse",
            a,
            b,
            forward.output().clone(),
            CoordinateFrame::absolute(n).labels().to_vec(),
        )
    }

    /// Three-particle `(x_cm, x_r1, x_r2; p_cm, π_1, π_2)`.
    pub fn xrpi3(masses: &MassConfig) -> Result<LinearCanonicalTransform> {
        if masses.len() != 3 {
            return Err(QrfError::InvalidMasses("xrpi3 needs exactly three particles".into()));
        }
        let mut t = cm_relative(masses)?;
        t.name = "xrpi3".into();
        Ok(t)
    }

    /// Three-particle `(q_cm, q_1, q_2; p_cm, p_r1, p_r2)`.
    pub fn qpr3(masses: &MassConfig) -> Result<LinearCanonicalTransform> {
        if masses.len() != 3 {
            return Err(QrfError::InvalidMasses("qpr3 needs exactly three particles".into()));
        }
        let (m0, m1, m2) = (masses.mass(0), masses.mass(1), masses.mass(2));
        let total = masses.total();
        let g = masses.gamma()?;
        let a = DMatrix::from_row_slice(
            3,
            3,
            &[
                m0 / total,
                m1 / total,
                m2 / total,
                -g * m0 / (m0 + m2),
                g,
                -g * m2 / (m0 + m2),
                -g * m0 / (m0 + m1),
                -g * m1 / (m0 + m1),
                g,
            ],
        );
        let (mu1, mu2) = (masses.reduced(1), masses.reduced(2));
        let b = DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 1.0, 1.0, -mu1 / m0, mu1 / m1, 0.0, -mu2 / m0, 0.0, mu2 / m2],
        );
        let labels = vec![
            CoordLabel::new("x_cm", "p_cm"),
            CoordLabel::new("q1", "p_r1"),
            CoordLabel::new("q2", "p_r2"),
        ];
        LinearCanonicalTransform::new("qpr3", a, b, CoordinateFrame::absolute(3), labels)
    }

    /// Mass-free two-particle map `q0 = x0, q1 = x1 − x0`, `π0 = p0 + p1, π1 = p1`.
    pub fn ak() -> Result<LinearCanonicalTransform> {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let labels = vec![CoordLabel::new("q0", "pi_q0"), CoordLabel::new("q1", "pi_q1")];
        LinearCanonicalTransform::new("ak", a, b, CoordinateFrame::absolute(2), labels)
    }

    /// Looks up a catalog entry by name.
    pub fn by_name(name: &str, masses: &MassConfig) -> Result<LinearCanonicalTransform> {
        match name {
            "identity" => Ok(identity(&CoordinateFrame::absolute(masses.len()))),
            "cm_relative" => cm_relative(masses),
            "cm_relative_inverse" => cm_relative_inverse(masses),
            "xrpi3" => xrpi3(masses),
            "qpr3" => qpr3(masses),
            "ak" => ak(),
            other => Err(QrfError::InvalidArgument(format!("unknown transform `{other}`"))),
        }
    }

    pub const NAMES: [&str; 6] = ["identity", "cm_relative", "cm_relative_inverse", "xrpi3", "qpr3", "ak"];
}

/// Absolute momentum coefficients of `p_rj = μ0j (p_j/m_j − p_0/m_0)`.
pub fn p_rel_coefficients(masses: &MassConfig, j: usize) -> Result<DVector<f64>> {
    if j == 0 || j >= masses.len() {
        return Err(QrfError::IndexOutOfRange(format!("relative index {j}")));
    }
    let mu = masses.reduced(j);
    let mut b = DVector::zeros(masses.len());
    b[0] = -mu / masses.mass(0);
    b[j] = mu / masses.mass(j);
    Ok(b)
}

/// Applies `exp(−i δ p_rj / ħ)`: a rigid translation of the absolute
/// positions by `δ · μ0j (e_j/m_j − e_0/m_0)`, mapped into the state's frame.
pub fn relative_momentum_shift(s: &State, j: usize, delta: f64) -> Result<State> {
    let b = p_rel_coefficients(s.masses(), j)?;
    let shift = s.frame().from_absolute() * b * delta;
    s.translated(shift.as_slice())
}

#[cfg(test)]
mod tests {
    use super::catalog::*;
    use super::*;
    use crate::gaussian::GaussianBranch;
    use num_complex::Complex64;

    fn m(v: &[f64]) -> MassConfig {
        MassConfig::new(v.to_vec()).unwrap()
    }

    #[test]
    fn catalog_is_symplectic() {
        for masses in [m(&[1.0, 1.0, 1.0]), m(&[1.0, 2.0, 5.0]), m(&[1e6, 1.0, 3.0])] {
            for name in NAMES {
                let t = by_name(name, &masses).unwrap();
                assert!(t.symplectic_error() < 1e-12, "{name}: {}", t.symplectic_error());
            }
        }
    }

    #[test]
    fn explicit_inverse_matches_algebraic_inverse() {
        let masses = m(&[1.0, 2.0, 5.0]);
        let a = cm_relative_inverse(&masses).unwrap();
        let b = cm_relative(&masses).unwrap().inverse();
        assert!((a.position_block() - b.position_block()).amax() < 1e-14);
        let id = a.after(&cm_relative(&masses).unwrap()).unwrap();
        assert!((id.position_block() - DMatrix::identity(3, 3)).amax() < 1e-14);
        assert!(id.output().is_absolute());
    }

    #[test]
    fn cm_relative_centres() {
        let s = GaussianSuperposition::product(&m(&[1.0, 1.0]), &[0.0, 2.0], &[0.3, 0.3]).unwrap();
        let t = cm_relative(s.masses()).unwrap().apply_to_gaussian(&s).unwrap();
        assert_eq!(t.branches()[0].centers.as_slice(), &[1.0, 2.0]);
        assert!((t.norm_squared().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qpr3_centres_by_hand() {
        let masses = m(&[1.0, 1.0, 1.0]);
        let t = qpr3(&masses).unwrap();
        let y = t.position_block() * DVector::from_vec(vec![0.0, 1.0, 2.0]);
        let g = 4.0 / 3.0;
        assert!((y[0] - 1.0).abs() < 1e-15);
        assert!((y[1] - g * (1.0 - (0.0 + 2.0) / 2.0)).abs() < 1e-15);
        assert!((y[2] - g * (2.0 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn commutator_table_for_mixed_pairs() {
        // [x_rj, p_rk] from the absolute coefficient vectors
        let masses = m(&[1.0, 2.0, 5.0]);
        let hbar = 1.0;
        for j in 1..3 {
            for k in 1..3 {
                let mut a = DVector::zeros(3);
                a[0] = -1.0;
                a[j] = 1.0;
                let b = p_rel_coefficients(&masses, k).unwrap();
                let value = hbar * a.dot(&b);
                let expected = if j == k {
                    1.0
                } else {
                    masses.mass(k) / (masses.mass(0) + masses.mass(k))
                };
                assert!((value - expected).abs() < 1e-12);
            }
        }
        let t = qpr3(&masses).unwrap();
        assert!((t.commutator_table() - DMatrix::identity(3, 3)).amax() < 1e-12);
    }

    #[test]
    fn relative_shift_kicks_other_coordinates() {
        let masses = m(&[1.0, 1.0, 1.0]);
        let s = GaussianSuperposition::product(&masses, &[0.0, 1.0, 2.0], &[0.5, 0.5, 0.5]).unwrap();
        let t = cm_relative(&masses).unwrap().apply_to_gaussian(&s).unwrap();
        let before = t.moments().unwrap().mean_x;
        let shifted = relative_momentum_shift(&State::from(t), 1, 1.0).unwrap();
        let after = shifted.moments().unwrap().mean_x;
        assert!((after[0] - before[0]).abs() < 1e-12);
        assert!((after[1] - before[1] - 1.0).abs() < 1e-12);
        assert!((after[2] - before[2] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn grid_transform_matches_gaussian_image() {
        let masses = m(&[1.0, 2.0]);
        let b = GaussianBranch::new(Complex64::new(1.0, 0.0), vec![0.2, 0.9], vec![0.7, 0.6], vec![0.3, -0.4])
            .unwrap();
        let s = GaussianSuperposition::new(CoordinateFrame::absolute(2), masses.clone(), vec![b]).unwrap();
        let src = [Axis::centered(8.0, 256).unwrap(), Axis::centered(8.0, 256).unwrap()];
        let g = GridState::rasterize(&s, &src).unwrap();
        let t = cm_relative(&masses).unwrap();
        let img = t.apply_to_grid(&g, &src).unwrap();
        let exact = GridState::rasterize(&t.apply_to_gaussian(&s).unwrap(), &src).unwrap();
        let worst = img
            .amplitudes()
            .iter()
            .zip(exact.amplitudes())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn clipped_support_is_reported() {
        let masses = m(&[1.0, 1.0]);
        let s = GaussianSuperposition::product(&masses, &[0.0, 3.0], &[0.5, 0.5]).unwrap();
        let src = [Axis::centered(8.0, 64).unwrap(), Axis::centered(8.0, 64).unwrap()];
        let g = GridState::rasterize(&s, &src).unwrap();
        let tgt = [Axis::centered(8.0, 64).unwrap(), Axis::centered(1.0, 64).unwrap()];
        let err = cm_relative(&masses).unwrap().apply_to_grid(&g, &tgt).unwrap_err();
        assert!(matches!(err, QrfError::SupportClipped { .. }));
    }
}
