//! Reduced states: partial traces over the centre of mass or over other
//! particles, the active map `T`, twirling and the mass-free AK reduction.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{QrfError, Result};
use crate::exponent::Exponent;
use crate::frame::CoordinateFrame;
use crate::gaussian::GaussianSuperposition;
use crate::grid::{cell_volume, shape_of, unravel, Axis, GridState};
use crate::mass::MassConfig;
use crate::state::{State, Wavefunction};
use crate::transform::catalog;

/// Input norm tolerance for the reductions.
const NORM_TOLERANCE: f64 = 1e-8;

/// Kernel `ρ(χ, χ')` sampled on the tensor grid of the retained axes.
/// Rows and columns use the row-major flattening of the grid.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    labels: Vec<String>,
    axes: Vec<Axis>,
    data: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn new(labels: Vec<String>, axes: Vec<Axis>, data: DMatrix<Complex64>) -> Result<Self> {
        let n: usize = axes.iter().map(|a| a.n).product();
        if labels.len() != axes.len() || data.shape() != (n, n) {
            return Err(QrfError::DimensionMismatch(format!(
                "{} labels, {} axes, {}x{} matrix",
                labels.len(),
                axes.len(),
                data.nrows(),
                data.ncols()
            )));
        }
        Ok(Self { labels, axes, data })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn size(&self) -> usize {
        self.data.nrows()
    }

    pub fn cell_volume(&self) -> f64 {
        cell_volume(&self.axes)
    }

    pub fn trace(&self) -> f64 {
        self.data.diagonal().iter().map(|v| v.re).sum::<f64>() * self.cell_volume()
    }

    pub fn purity(&self) -> f64 {
        let dv = self.cell_volume();
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * dv * dv
    }

    pub fn linear_entropy(&self) -> f64 {
        1.0 - self.purity()
    }

    /// Probability density on the grid points.
    pub fn diagonal(&self) -> Vec<f64> {
        self.data.diagonal().iter().map(|v| v.re).collect()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.size();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..=i {
                worst = worst.max((self.data[(i, j)] - self.data[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `ρ / Tr ρ`.
    pub fn normalized(&self) -> Self {
        let t = self.trace();
        Self { data: self.data.map(|v| v / t), ..self.clone() }
    }

    /// Operator eigenvalues of `ρ dV`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.data, self.cell_volume())
    }

    /// Smallest eigenvalue of a principal submatrix on at most `max_points`
    /// grid points. Principal submatrices of a positive kernel stay positive,
    /// so any negative value flags a genuine violation.
    pub fn min_eigenvalue(&self, max_points: usize) -> f64 {
        let per_axis = (max_points as f64).powf(1.0 / self.axes.len() as f64).floor() as usize;
        let shape = shape_of(&self.axes);
        let steps: Vec<usize> = shape.iter().map(|&n| n.div_ceil(per_axis.max(1)).max(1)).collect();
        let mut idx = vec![0; shape.len()];
        let picked: Vec<usize> = (0..self.size())
            .filter(|&flat| {
                unravel(flat, &shape, &mut idx);
                idx.iter().zip(&steps).all(|(i, s)| i % s == 0)
            })
            .collect();
        let sub = DMatrix::from_fn(picked.len(), picked.len(), |i, j| self.data[(picked[i], picked[j])]);
        let dv: f64 = self.axes.iter().zip(&steps).map(|(a, &s)| a.spacing() * s as f64).product();
        hermitian_eigenvalues(&sub, dv).into_iter().fold(f64::INFINITY, f64::min)
    }

    fn check_compatible(&self, other: &DensityMatrix) -> Result<()> {
        let same = self.axes.len() == other.axes.len()
            && self
                .axes
                .iter()
                .zip(&other.axes)
                .all(|(a, b)| a.n == b.n && (a.spacing() - b.spacing()).abs() < 1e-12 * a.spacing());
        if same {
            Ok(())
        } else {
            Err(QrfError::InvalidGrid("density matrices on incompatible grids".into()))
        }
    }

    /// `½ Σ |eig((ρ − σ) dV)|`. Grids must share shape and spacing; offsets
    /// are allowed so that shifted descriptions can be compared.
    pub fn trace_distance(&self, other: &DensityMatrix) -> Result<f64> {
        self.check_compatible(other)?;
        let diff = &self.data - &other.data;
        Ok(0.5 * hermitian_eigenvalues(&diff, self.cell_volume()).iter().map(|v| v.abs()).sum::<f64>())
    }

    /// Largest elementwise deviation.
    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        self.check_compatible(other)?;
        Ok((&self.data - &other.data).iter().map(|v| v.norm()).fold(0.0, f64::max))
    }

    /// Largest deviation among the off-diagonal elements.
    pub fn max_coherence_diff(&self, other: &DensityMatrix) -> Result<f64> {
        self.check_compatible(other)?;
        let n = self.size();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    worst = worst.max((self.data[(i, j)] - other.data[(i, j)]).norm());
                }
            }
        }
        Ok(worst)
    }

    /// Hermitian, trace-one and positive within the stated tolerances.
    pub fn check(&self, herm_tol: f64, trace_tol: f64, eig_tol: f64) -> Result<()> {
        let h = self.hermiticity_error();
        if h > herm_tol {
            return Err(QrfError::Linalg(format!("hermiticity error {h:e}")));
        }
        let t = self.trace();
        if (t - 1.0).abs() > trace_tol {
            return Err(QrfError::NotNormalized(t));
        }
        let e = self.min_eigenvalue(64);
        if e < -eig_tol {
            return Err(QrfError::Linalg(format!("negative eigenvalue {e:e}")));
        }
        Ok(())
    }
}

fn hermitian_eigenvalues(m: &DMatrix<Complex64>, scale: f64) -> Vec<f64> {
    let h = (m + m.adjoint()).map(|v| v * (0.5 * scale));
    let mut ev: Vec<f64> = SymmetricEigen::new(h).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Closed-form kernel `ρ(χ, χ') = Σ_t w_t exp(E_t(χ, χ'))`, each exponent
/// living on the stacked variables `(χ, χ')`.
#[derive(Debug, Clone)]
pub struct GaussianDensity {
    labels: Vec<String>,
    terms: Vec<(Complex64, Exponent)>,
}

fn selector(n_out: usize, sources: &[usize], width: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n_out, width);
    for (row, &col) in sources.iter().enumerate() {
        m[(row, col)] = 1.0;
    }
    m
}

impl GaussianDensity {
    /// `Tr_{traced} |ψ⟩⟨ψ|`, keeping the listed frame coordinates in order.
    pub fn partial_trace(s: &GaussianSuperposition, keep: &[usize]) -> Result<Self> {
        let n = s.dim();
        if keep.is_empty() || keep.iter().any(|&k| k >= n) {
            return Err(QrfError::IndexOutOfRange(format!("keep {keep:?} in a {n}-dimensional frame")));
        }
        let traced: Vec<usize> = (0..n).filter(|i| !keep.contains(i)).collect();
        let (t, k) = (traced.len(), keep.len());
        let width = t + 2 * k;
        // y = M z with z = (u, χ, χ'); the bra side reads χ' instead of χ
        let mut ket_src = vec![0; n];
        let mut bra_src = vec![0; n];
        for (i, &c) in traced.iter().enumerate() {
            ket_src[c] = i;
            bra_src[c] = i;
        }
        for (i, &c) in keep.iter().enumerate() {
            ket_src[c] = t + i;
            bra_src[c] = t + k + i;
        }
        let m_ket = selector(n, &ket_src, width);
        let m_bra = selector(n, &bra_src, width);
        let exps = s.exponents();
        let traced_vars: Vec<usize> = (0..t).collect();
        let mut terms = Vec::new();
        for (ba, ea) in s.branches().iter().zip(&exps) {
            for (bb, eb) in s.branches().iter().zip(&exps) {
                let mut origin = DVector::zeros(width);
                for (i, &c) in traced.iter().enumerate() {
                    origin[i] = ba.centers[c];
                }
                for (i, &c) in keep.iter().enumerate() {
                    origin[t + i] = ba.centers[c];
                    origin[t + k + i] = bb.centers[c];
                }
                let joint = ea.pullback(&m_ket, &origin).mul(&eb.conj().pullback(&m_bra, &origin));
                let reduced = joint.integrate_out(&traced_vars)?;
                terms.push((ba.coefficient * bb.coefficient.conj(), reduced));
            }
        }
        let labels = keep.iter().map(|&i| s.frame().labels()[i].position.clone()).collect();
        Ok(Self { labels, terms })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn value(&self, chi: &[f64], chi_p: &[f64]) -> Complex64 {
        let z: Vec<f64> = chi.iter().chain(chi_p).copied().collect();
        self.terms.iter().map(|(w, e)| w * e.value(&z)).sum()
    }

    fn diagonal_term(e: &Exponent, k: usize) -> Exponent {
        let mut d = DMatrix::zeros(2 * k, k);
        for i in 0..k {
            d[(i, i)] = 1.0;
            d[(k + i, i)] = 1.0;
        }
        let origin = DVector::from_iterator(k, e.origin.iter().take(k).copied());
        e.pullback(&d, &origin)
    }

    pub fn trace(&self) -> Result<f64> {
        let k = self.dim();
        let mut acc = Complex64::new(0.0, 0.0);
        for (w, e) in &self.terms {
            acc += w * Self::diagonal_term(e, k).integrate()?;
        }
        Ok(acc.re)
    }

    /// `Tr ρ²` in closed form.
    pub fn purity(&self) -> Result<f64> {
        let k = self.dim();
        let mut swap = DMatrix::zeros(2 * k, 2 * k);
        for i in 0..k {
            swap[(i, k + i)] = 1.0;
            swap[(k + i, i)] = 1.0;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (wa, ea) in &self.terms {
            for (wb, eb) in &self.terms {
                let swapped = eb.pullback(&swap, &ea.origin);
                acc += wa * wb * ea.mul(&swapped).integrate()?;
            }
        }
        Ok(acc.re)
    }

    /// Further partial trace over the listed retained coordinates.
    pub fn trace_out(&self, traced: &[usize]) -> Result<Self> {
        let k = self.dim();
        let keep: Vec<usize> = (0..k).filter(|i| !traced.contains(i)).collect();
        let (t, r) = (traced.len(), keep.len());
        let width = t + 2 * r;
        // (χ, χ') = M (w, ξ, ξ') with χ_traced = χ'_traced = w
        let mut src = vec![0; 2 * k];
        for (i, &c) in traced.iter().enumerate() {
            src[c] = i;
            src[k + c] = i;
        }
        for (i, &c) in keep.iter().enumerate() {
            src[c] = t + i;
            src[k + c] = t + r + i;
        }
        let m = selector(2 * k, &src, width);
        let vars: Vec<usize> = (0..t).collect();
        let terms = self
            .terms
            .iter()
            .map(|(w, e)| {
                let mut origin = DVector::zeros(width);
                for (i, &c) in src.iter().enumerate() {
                    origin[c] = e.origin[i];
                }
                e.pullback(&m, &origin).integrate_out(&vars).map(|x| (*w, x))
            })
            .collect::<Result<Vec<_>>>()?;
        let labels = keep.iter().map(|&i| self.labels[i].clone()).collect();
        Ok(Self { labels, terms })
    }

    /// Samples the kernel on the tensor grid of `axes`.
    pub fn to_grid(&self, axes: &[Axis]) -> Result<DensityMatrix> {
        if axes.len() != self.dim() {
            return Err(QrfError::DimensionMismatch(format!(
                "{} axes for a {}-dimensional density",
                axes.len(),
                self.dim()
            )));
        }
        let shape = shape_of(axes);
        let n: usize = shape.iter().product();
        let points: Vec<Vec<f64>> = (0..n)
            .map(|flat| {
                let mut idx = vec![0; shape.len()];
                unravel(flat, &shape, &mut idx);
                idx.iter().zip(axes).map(|(&i, a)| a.point(i)).collect()
            })
            .collect();
        let cols: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|j| (0..n).map(|i| self.value(&points[i], &points[j])).collect())
            .collect();
        let data = DMatrix::from_fn(n, n, |i, j| cols[j][i]);
        DensityMatrix::new(self.labels.clone(), axes.to_vec(), data)
    }
}

/// A reduced state from either backend.
#[derive(Debug, Clone)]
pub enum Reduced {
    Gaussian(GaussianDensity),
    Grid(DensityMatrix),
}

impl Reduced {
    pub fn labels(&self) -> &[String] {
        match self {
            Reduced::Gaussian(g) => g.labels(),
            Reduced::Grid(g) => g.labels(),
        }
    }

    pub fn purity(&self) -> Result<f64> {
        match self {
            Reduced::Gaussian(g) => g.purity(),
            Reduced::Grid(g) => Ok(g.purity()),
        }
    }

    pub fn trace(&self) -> Result<f64> {
        match self {
            Reduced::Gaussian(g) => g.trace(),
            Reduced::Grid(g) => Ok(g.trace()),
        }
    }

    /// Grid samples; a grid-backed result must already live on `axes`.
    pub fn to_grid(&self, axes: &[Axis]) -> Result<DensityMatrix> {
        match self {
            Reduced::Gaussian(g) => g.to_grid(axes),
            Reduced::Grid(g) if g.axes() == axes => Ok(g.clone()),
            Reduced::Grid(_) => Err(QrfError::InvalidGrid("reduced state lives on different axes".into())),
        }
    }
}

/// `ρ(χ, χ') = Σ_u ψ(u, χ) ψ*(u, χ') du` with the traced axes playing `u`.
pub fn partial_trace(s: &GridState, keep: &[usize]) -> Result<DensityMatrix> {
    let d = s.axes().len();
    if keep.is_empty() || keep.iter().any(|&k| k >= d) {
        return Err(QrfError::IndexOutOfRange(format!("keep {keep:?} on a {d}-axis grid")));
    }
    let traced: Vec<usize> = (0..d).filter(|i| !keep.contains(i)).collect();
    let shape = s.shape();
    let kept_shape: Vec<usize> = keep.iter().map(|&k| shape[k]).collect();
    let traced_shape: Vec<usize> = traced.iter().map(|&k| shape[k]).collect();
    let nk: usize = kept_shape.iter().product();
    let nt: usize = traced_shape.iter().product();
    // Ψ[t, k] gathered from the row-major amplitude array
    let mut psi = DMatrix::<Complex64>::zeros(nt, nk);
    let mut idx = vec![0; d];
    let kept_strides = crate::grid::strides(&kept_shape);
    let traced_strides = crate::grid::strides(&traced_shape);
    for (flat, a) in s.amplitudes().iter().enumerate() {
        unravel(flat, &shape, &mut idx);
        let row: usize = traced.iter().zip(&traced_strides).map(|(&ax, st)| idx[ax] * st).sum();
        let col: usize = keep.iter().zip(&kept_strides).map(|(&ax, st)| idx[ax] * st).sum();
        psi[(row, col)] = *a;
    }
    let du: f64 = traced.iter().map(|&k| s.axes()[k].spacing()).product();
    let data = psi.transpose() * psi.map(|v| v.conj()) * Complex64::new(du, 0.0);
    let labels = keep.iter().map(|&k| s.frame().labels()[k].position.clone()).collect();
    let axes = keep.iter().map(|&k| s.axes()[k]).collect();
    DensityMatrix::new(labels, axes, data)
}

fn check_norm(s: &State) -> Result<()> {
    let norm = match s {
        State::Gaussian(g) => g.norm_squared()?,
        State::Grid(g) => g.norm_squared(),
    };
    if (norm - 1.0).abs() > NORM_TOLERANCE {
        return Err(QrfError::NotNormalized(norm));
    }
    Ok(())
}

/// `ρ_r = Tr_cm |ψ⟩⟨ψ|`. Gaussian states in the absolute frame are moved to
/// `(x_cm, x_r)` first; grid states must already be sampled there.
pub fn reduce_relative(s: &State) -> Result<Reduced> {
    check_norm(s)?;
    let n = s.frame().dim();
    let keep: Vec<usize> = (1..n).collect();
    match s {
        State::Gaussian(g) => {
            let g = if g.frame().is_absolute() {
                catalog::cm_relative(g.masses())?.apply_to_gaussian(g)?
            } else {
                g.clone()
            };
            g.frame().expect(&CoordinateFrame::cm_relative(g.masses()))?;
            GaussianDensity::partial_trace(&g, &keep).map(Reduced::Gaussian)
        }
        State::Grid(g) => {
            g.frame().expect(&CoordinateFrame::cm_relative(g.masses()))?;
            partial_trace(g, &keep).map(Reduced::Grid)
        }
    }
}

/// `ρ_k = Tr_{i≠k} |ψ⟩⟨ψ|` in the absolute frame.
pub fn reduce_external(s: &State, keep: usize) -> Result<Reduced> {
    check_norm(s)?;
    s.frame().expect(&CoordinateFrame::absolute(s.masses().len()))?;
    match s {
        State::Gaussian(g) => GaussianDensity::partial_trace(g, &[keep]).map(Reduced::Gaussian),
        State::Grid(g) => partial_trace(g, &[keep]).map(Reduced::Grid),
    }
}

/// `T|ψ⟩`: the passive cm-relative numbers written back into the absolute
/// slots, so slot 0 carries `x_cm` and slot `j` carries `x_j − x_0`.
pub fn active_transform(s: &GaussianSuperposition) -> Result<GaussianSuperposition> {
    let n = s.masses().len();
    s.frame().expect(&CoordinateFrame::absolute(n))?;
    let passive = catalog::cm_relative(s.masses())?.apply_to_gaussian(s)?;
    GaussianSuperposition::new(CoordinateFrame::absolute(n), s.masses().clone(), passive.branches().to_vec())
}

/// Grid version of [`active_transform`], resampled on `target`.
pub fn active_transform_grid(s: &GridState, target: &[Axis]) -> Result<GridState> {
    let n = s.masses().len();
    s.frame().expect(&CoordinateFrame::absolute(n))?;
    let passive = catalog::cm_relative(s.masses())?.apply_to_grid(s, target)?;
    Ok(passive.relabeled(CoordinateFrame::absolute(n)))
}

/// `Σ_u v_u v_u† du` with `v_u(χ) = ψ(x(u, χ))`, sampled in parallel over `u`.
fn sampled_reduction<W, F>(psi: &W, u_axis: Axis, axes: &[Axis], labels: Vec<String>, point: F) -> Result<DensityMatrix>
where
    W: Wavefunction + ?Sized,
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    let shape = shape_of(axes);
    let nk: usize = shape.iter().product();
    let chis: Vec<Vec<f64>> = (0..nk)
        .map(|flat| {
            let mut idx = vec![0; shape.len()];
            unravel(flat, &shape, &mut idx);
            idx.iter().zip(axes).map(|(&i, a)| a.point(i)).collect()
        })
        .collect();
    let rows: Vec<Complex64> = (0..u_axis.n)
        .into_par_iter()
        .flat_map_iter(|iu| {
            let u = u_axis.point(iu);
            let mut x = vec![0.0; psi.dim()];
            chis.iter()
                .map(|chi| {
                    point(u, chi, &mut x);
                    psi.value(&x)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let v = DMatrix::from_row_slice(u_axis.n, nk, &rows);
    let data = v.transpose() * v.map(|c| c.conj()) * Complex64::new(u_axis.spacing(), 0.0);
    DensityMatrix::new(labels, axes.to_vec(), data)
}

/// Twirl over cm translations:
/// `ρ = ∫du T(u) ⟨u|ψ⟩⟨ψ|u⟩ T†(u)`, where the slot-0 conditional state
/// `⟨u|ψ⟩` is translated by `u` and its slot-0 argument is pulled back by
/// `−Σ m_k χ_k / M`. Taking a wavefunction makes the input pure by type.
pub fn twirl<W: Wavefunction + ?Sized>(
    psi: &W,
    masses: &MassConfig,
    u_axis: Axis,
    axes: &[Axis],
) -> Result<DensityMatrix> {
    let n = masses.len();
    if psi.dim() != n || axes.len() != n - 1 {
        return Err(QrfError::DimensionMismatch(format!(
            "twirl of a {}-dimensional state onto {} axes",
            psi.dim(),
            axes.len()
        )));
    }
    let total = masses.total();
    let weights: Vec<f64> = (1..n).map(|k| masses.mass(k) / total).collect();
    let labels = CoordinateFrame::relative_only(masses).position_labels();
    sampled_reduction(psi, u_axis, axes, labels, |u, chi, x| {
        // ⟨u|ψ⟩ translated by u along every other slot
        for j in 1..n {
            x[j] = chi[j - 1] + u;
        }
        // then the slot-0 argument u moves by −Σ m_k χ_k / M, carrying the
        // translation with it
        let shift: f64 = weights.iter().zip(chi).map(|(w, c)| w * c).sum();
        x[0] = u - shift;
        for xj in x.iter_mut().skip(1) {
            *xj -= shift;
        }
    })
}

/// `ρ_q1(χ, χ') = ∫du ψ(u, χ+u) ψ*(u, χ'+u)`, with no mass dependence.
pub fn ak_reduce_sampled<W: Wavefunction + ?Sized>(psi: &W, u_axis: Axis, axis: Axis) -> Result<DensityMatrix> {
    if psi.dim() != 2 {
        return Err(QrfError::InvalidArgument("the AK reduction is defined for two particles".into()));
    }
    sampled_reduction(psi, u_axis, &[axis], vec!["q1".into()], |u, chi, x| {
        x[0] = u;
        x[1] = chi[0] + u;
    })
}

/// AK reduction of a two-particle state in the absolute frame.
pub fn ak_reduce(s: &State) -> Result<Reduced> {
    check_norm(s)?;
    if s.masses().len() != 2 {
        return Err(QrfError::InvalidArgument("the AK reduction is defined for two particles".into()));
    }
    s.frame().expect(&CoordinateFrame::absolute(2))?;
    match s {
        State::Gaussian(g) => {
            let q = catalog::ak()?.apply_to_gaussian(g)?;
            GaussianDensity::partial_trace(&q, &[1]).map(Reduced::Gaussian)
        }
        State::Grid(g) => {
            let interp = g.interpolator();
            ak_reduce_sampled(&interp, g.axes()[0], g.axes()[1]).map(Reduced::Grid)
        }
    }
}
