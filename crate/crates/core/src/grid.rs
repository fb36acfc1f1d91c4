//! Oracle backend: complex amplitudes on a periodic multi-axis grid.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{QrfError, Result};
use crate::exponent::symmetrize;
use crate::frame::CoordinateFrame;
use crate::gaussian::{GaussianSuperposition, StateMoments};
use crate::mass::MassConfig;
use crate::state::Wavefunction;

/// Clearance, in branch widths, required between a centre and the grid edge.
pub const CLEARANCE_WIDTHS: f64 = 6.0;

/// A periodic axis with `n` points `min + i h`, `h = (max - min) / n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min.is_finite() && max.is_finite() && max > min) {
            return Err(QrfError::InvalidGrid(format!("axis [{min}, {max}] is empty")));
        }
        if n < 2 || !n.is_power_of_two() {
            return Err(QrfError::InvalidGrid(format!("axis size {n} is not a power of two")));
        }
        Ok(Self { min, max, n })
    }

    /// Symmetric axis `[-half, half)`.
    pub fn centered(half: f64, n: usize) -> Result<Self> {
        Self::new(-half, half, n)
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.min, self.max, self.n).map(|_| ())
    }

    pub fn length(&self) -> f64 {
        self.max - self.min
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.n as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        self.min + i as f64 * self.spacing()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    /// Angular wavenumbers in FFT order.
    pub fn wavenumbers(&self) -> Vec<f64> {
        let dk = 2.0 * std::f64::consts::PI / self.length();
        (0..self.n)
            .map(|i| if i < self.n / 2 { i as f64 } else { i as f64 - self.n as f64 })
            .map(|m| m * dk)
            .collect()
    }

    pub fn max_wavenumber(&self) -> f64 {
        std::f64::consts::PI / self.spacing()
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    /// Every `factor`-th point of this axis.
    pub fn downsampled(&self, factor: usize) -> Result<Self> {
        Axis::new(self.min, self.max, self.n / factor)
    }
}

pub(crate) fn shape_of(axes: &[Axis]) -> Vec<usize> {
    axes.iter().map(|a| a.n).collect()
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for k in (0..shape.len().saturating_sub(1)).rev() {
        s[k] = s[k + 1] * shape[k + 1];
    }
    s
}

pub(crate) fn unravel(mut flat: usize, shape: &[usize], out: &mut [usize]) {
    for k in (0..shape.len()).rev() {
        out[k] = flat % shape[k];
        flat /= shape[k];
    }
}

pub(crate) fn cell_volume(axes: &[Axis]) -> f64 {
    axes.iter().map(|a| a.spacing()).product()
}

/// Cached plans for repeated N-dimensional FFTs on one grid shape.
pub struct FftNd {
    shape: Vec<usize>,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
}

impl FftNd {
    pub fn new(shape: &[usize]) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            shape: shape.to_vec(),
            forward: shape.iter().map(|&n| planner.plan_fft_forward(n)).collect(),
            inverse: shape.iter().map(|&n| planner.plan_fft_inverse(n)).collect(),
        }
    }

    fn run(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>]) {
        let total: usize = self.shape.iter().product();
        assert_eq!(data.len(), total);
        let st = strides(&self.shape);
        let last = self.shape.len() - 1;
        for (axis, plan) in plans.iter().enumerate() {
            let n = self.shape[axis];
            if axis == last {
                plan.process(data);
                continue;
            }
            let stride = st[axis];
            let block = n * stride;
            let mut line = vec![Complex64::new(0.0, 0.0); n];
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for (i, v) in line.iter_mut().enumerate() {
                        *v = data[base + i * stride];
                    }
                    plan.process(&mut line);
                    for (i, v) in line.iter().enumerate() {
                        data[base + i * stride] = *v;
                    }
                }
            }
        }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.run(data, &self.forward);
    }

    /// Inverse transform including the `1/N` normalisation.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, &self.inverse);
        let scale = 1.0 / data.len() as f64;
        data.iter_mut().for_each(|v| *v *= scale);
    }
}

/// Complex amplitudes on a regular periodic grid, normalised so that
/// `Σ |ψ|² dV = 1`.
#[derive(Debug, Clone)]
pub struct GridState {
    frame: CoordinateFrame,
    axes: Vec<Axis>,
    amplitudes: Vec<Complex64>,
    masses: MassConfig,
}

impl GridState {
    /// Wraps amplitudes that are already normalised (within 1e-10).
    pub fn new(
        frame: CoordinateFrame,
        masses: MassConfig,
        axes: Vec<Axis>,
        amplitudes: Vec<Complex64>,
    ) -> Result<Self> {
        let s = Self::unnormalized(frame, masses, axes, amplitudes)?;
        let norm = s.norm_squared();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(QrfError::NotNormalized(norm));
        }
        Ok(s)
    }

    pub(crate) fn unnormalized(
        frame: CoordinateFrame,
        masses: MassConfig,
        axes: Vec<Axis>,
        amplitudes: Vec<Complex64>,
    ) -> Result<Self> {
        if axes.len() != frame.dim() {
            return Err(QrfError::DimensionMismatch(format!(
                "{} axes for a {}-dimensional frame",
                axes.len(),
                frame.dim()
            )));
        }
        for a in &axes {
            a.validate()?;
        }
        let total: usize = axes.iter().map(|a| a.n).product();
        if amplitudes.len() != total {
            return Err(QrfError::DimensionMismatch(format!(
                "{} amplitudes for a grid of {} points",
                amplitudes.len(),
                total
            )));
        }
        Ok(Self { frame, axes, amplitudes, masses })
    }

    /// Normalises arbitrary amplitudes; returns the state and `|1 - norm²|`.
    pub fn normalized(
        frame: CoordinateFrame,
        masses: MassConfig,
        axes: Vec<Axis>,
        amplitudes: Vec<Complex64>,
    ) -> Result<(Self, f64)> {
        let mut s = Self::unnormalized(frame, masses, axes, amplitudes)?;
        let norm = s.norm_squared();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(QrfError::NotNormalized(norm));
        }
        let scale = 1.0 / norm.sqrt();
        s.amplitudes.iter_mut().for_each(|v| *v *= scale);
        Ok((s, (1.0 - norm).abs()))
    }

    /// Samples `f` at every grid point and normalises.
    pub fn sample<F>(
        frame: CoordinateFrame,
        masses: MassConfig,
        axes: Vec<Axis>,
        f: F,
    ) -> Result<(Self, f64)>
    where
        F: Fn(&[f64]) -> Complex64 + Sync,
    {
        let shape = shape_of(&axes);
        let total: usize = shape.iter().product();
        let amplitudes: Vec<Complex64> = (0..total)
            .into_par_iter()
            .map_init(
                || (vec![0usize; shape.len()], vec![0.0; shape.len()]),
                |(idx, x), flat| {
                    unravel(flat, &shape, idx);
                    for k in 0..shape.len() {
                        x[k] = axes[k].point(idx[k]);
                    }
                    f(x)
                },
            )
            .collect();
        Self::normalized(frame, masses, axes, amplitudes)
    }

    /// Pointwise evaluation of an exact state; returns the renormalisation
    /// correction `|1 - Σ|ψ|² dV|`.
    pub fn rasterize_with_report(state: &GaussianSuperposition, axes: &[Axis]) -> Result<(Self, f64)> {
        if axes.len() != state.dim() {
            return Err(QrfError::DimensionMismatch(format!(
                "{} axes for a {}-dimensional state",
                axes.len(),
                state.dim()
            )));
        }
        check_clearance(state, axes)?;
        Self::sample(state.frame().clone(), state.masses().clone(), axes.to_vec(), |x| state.value(x))
    }

    pub fn rasterize(state: &GaussianSuperposition, axes: &[Axis]) -> Result<Self> {
        Self::rasterize_with_report(state, axes).map(|(s, _)| s)
    }

    /// Product of packets `exp(−(y−a)²/4Δ² + i p y/ħ)` in an arbitrary frame.
    pub fn packet(
        frame: CoordinateFrame,
        masses: MassConfig,
        axes: &[Axis],
        centers: &[f64],
        widths: &[f64],
        momenta: &[f64],
    ) -> Result<Self> {
        let branch = crate::gaussian::GaussianBranch::new(
            Complex64::new(1.0, 0.0),
            centers.to_vec(),
            widths.to_vec(),
            momenta.to_vec(),
        )?;
        Self::rasterize(&GaussianSuperposition::new(frame, masses, vec![branch])?, axes)
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

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn shape(&self) -> Vec<usize> {
        shape_of(&self.axes)
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }


    pub fn cell_volume(&self) -> f64 {
        cell_volume(&self.axes)
    }

    pub fn norm_squared(&self) -> f64 {
        self.amplitudes.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell_volume()
    }

    pub(crate) fn with_amplitudes(&self, amplitudes: Vec<Complex64>) -> Self {
        Self { amplitudes, ..self.clone() }
    }

    pub(crate) fn relabeled(&self, frame: CoordinateFrame) -> Self {
        Self { frame, ..self.clone() }
    }

    /// Coordinates of grid point `flat`.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let shape = self.shape();
        let mut idx = vec![0; shape.len()];
        unravel(flat, &shape, &mut idx);
        idx.iter().zip(&self.axes).map(|(&i, a)| a.point(i)).collect()
    }

    pub fn inner_product(&self, other: &GridState) -> Result<Complex64> {
        other.frame.expect(&self.frame)?;
        if self.axes != other.axes {
            return Err(QrfError::InvalidGrid("inner product of states on different grids".into()));
        }
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.cell_volume())
    }

    /// `⟨self|other⟩` by quadrature of an exact state sampled on this grid.
    pub fn inner_product_with(&self, other: &GaussianSuperposition) -> Result<Complex64> {
        other.frame().expect(&self.frame)?;
        let shape = self.shape();
        let acc: Complex64 = self
            .amplitudes
            .par_iter()
            .enumerate()
            .map(|(flat, a)| {
                let mut idx = vec![0; shape.len()];
                unravel(flat, &shape, &mut idx);
                let x: Vec<f64> = idx.iter().zip(&self.axes).map(|(&i, ax)| ax.point(i)).collect();
                a.conj() * other.value(&x)
            })
            .sum();
        Ok(acc * self.cell_volume())
    }

    /// Momentum-space amplitudes (unnormalised DFT).
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut data = self.amplitudes.clone();
        FftNd::new(&self.shape()).forward(&mut data);
        data
    }

    /// `ψ(y - shift)` by exact spectral translation.
    pub fn translated(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.axes.len() {
            return Err(QrfError::DimensionMismatch(format!(
                "shift of length {} on a {}-axis grid",
                shift.len(),
                self.axes.len()
            )));
        }
        let shape = self.shape();
        let fft = FftNd::new(&shape);
        let mut data = self.amplitudes.clone();
        fft.forward(&mut data);
        let ks: Vec<Vec<f64>> = self.axes.iter().map(|a| a.wavenumbers()).collect();
        let mut idx = vec![0; shape.len()];
        for (flat, v) in data.iter_mut().enumerate() {
            unravel(flat, &shape, &mut idx);
            let phase: f64 = (0..shape.len()).map(|k| -ks[k][idx[k]] * shift[k]).sum();
            *v *= Complex64::from_polar(1.0, phase);
        }
        fft.inverse(&mut data);
        Ok(self.with_amplitudes(data))
    }

    /// Position moments by quadrature, momentum moments spectrally.
    pub fn moments(&self) -> Result<StateMoments> {
        let d = self.axes.len();
        let shape = self.shape();
        let hbar = self.hbar();
        let dv = self.cell_volume();
        let norm = self.norm_squared();
        let mut idx = vec![0; d];

        let mut mean_x = DVector::zeros(d);
        for (flat, a) in self.amplitudes.iter().enumerate() {
            unravel(flat, &shape, &mut idx);
            let w = a.norm_sqr() * dv / norm;
            for k in 0..d {
                mean_x[k] += w * self.axes[k].point(idx[k]);
            }
        }
        let mut cov_x = DMatrix::zeros(d, d);
        for (flat, a) in self.amplitudes.iter().enumerate() {
            unravel(flat, &shape, &mut idx);
            let w = a.norm_sqr() * dv / norm;
            let dx: Vec<f64> = (0..d).map(|k| self.axes[k].point(idx[k]) - mean_x[k]).collect();
            for i in 0..d {
                for j in 0..d {
                    cov_x[(i, j)] += w * dx[i] * dx[j];
                }
            }
        }

        let fft = FftNd::new(&shape);
        let mut spectrum = self.amplitudes.clone();
        fft.forward(&mut spectrum);
        let ks: Vec<Vec<f64>> = self.axes.iter().map(|a| a.wavenumbers()).collect();
        let total_w: f64 = spectrum.iter().map(|v| v.norm_sqr()).sum();
        let mut mean_p = DVector::zeros(d);
        for (flat, v) in spectrum.iter().enumerate() {
            unravel(flat, &shape, &mut idx);
            let w = v.norm_sqr() / total_w;
            for k in 0..d {
                mean_p[k] += w * hbar * ks[k][idx[k]];
            }
        }
        let mut cov_p = DMatrix::zeros(d, d);
        for (flat, v) in spectrum.iter().enumerate() {
            unravel(flat, &shape, &mut idx);
            let w = v.norm_sqr() / total_w;
            let dp: Vec<f64> = (0..d).map(|k| hbar * ks[k][idx[k]] - mean_p[k]).collect();
            for i in 0..d {
                for j in 0..d {
                    cov_p[(i, j)] += w * dp[i] * dp[j];
                }
            }
        }

        // ⟨x_i p_j⟩ with p_j ψ = -iħ ∂_j ψ evaluated spectrally
        let mut cov_xp = DMatrix::zeros(d, d);
        for j in 0..d {
            let mut deriv = spectrum.clone();
            for (flat, v) in deriv.iter_mut().enumerate() {
                unravel(flat, &shape, &mut idx);
                *v *= Complex64::new(0.0, ks[j][idx[j]]);
            }
            fft.inverse(&mut deriv);
            for i in 0..d {
                let mut acc = Complex64::new(0.0, 0.0);
                for (flat, (a, dpsi)) in self.amplitudes.iter().zip(&deriv).enumerate() {
                    unravel(flat, &shape, &mut idx);
                    let x = self.axes[i].point(idx[i]) - mean_x[i];
                    acc += a.conj() * x * Complex64::new(0.0, -hbar) * dpsi;
                }
                cov_xp[(i, j)] = acc.re * dv / norm;
            }
        }
        Ok(StateMoments { mean_x, cov_x: symmetrize(cov_x), mean_p, cov_p: symmetrize(cov_p), cov_xp })
    }

    /// Probability mass lying in the outer `fraction` band of any axis.
    pub fn edge_mass(&self, fraction: f64) -> Vec<f64> {
        let shape = self.shape();
        let dv = self.cell_volume();
        let mut idx = vec![0; shape.len()];
        let mut masses = vec![0.0; shape.len()];
        let bands: Vec<usize> =
            shape.iter().map(|&n| ((n as f64 * fraction).ceil() as usize).max(1)).collect();
        for (flat, a) in self.amplitudes.iter().enumerate() {
            unravel(flat, &shape, &mut idx);
            for k in 0..shape.len() {
                if idx[k] < bands[k] || idx[k] >= shape[k] - bands[k] {
                    masses[k] += a.norm_sqr() * dv;
                }
            }
        }
        masses
    }

    /// Cubic B-spline interpolant of the amplitudes (periodic).
    pub fn interpolator(&self) -> BSplineInterpolator {
        BSplineInterpolator::new(self)
    }
}

fn check_clearance(state: &GaussianSuperposition, axes: &[Axis]) -> Result<()> {
    let labels = state.frame().position_labels();
    for (b, branch) in state.branches().iter().enumerate() {
        let widths = branch.axis_widths();
        for (k, axis) in axes.iter().enumerate() {
            let need_min = branch.centers[k] - CLEARANCE_WIDTHS * widths[k];
            let need_max = branch.centers[k] + CLEARANCE_WIDTHS * widths[k];
            if need_min < axis.min || need_max > axis.max {
                return Err(QrfError::ExtentTooSmall {
                    axis: k,
                    label: labels[k].clone(),
                    branch: b,
                    need_min,
                    need_max,
                    min: axis.min,
                    max: axis.max,
                });
            }
        }
    }
    Ok(())
}

fn bspline_weights(t: f64) -> [f64; 4] {
    let u = 1.0 - t;
    [
        u * u * u / 6.0,
        (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0,
        (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0,
        t * t * t / 6.0,
    ]
}

/// Tensor-product cubic B-spline through the grid samples, periodic on the
/// grid box and zero outside it.
pub struct BSplineInterpolator {
    axes: Vec<Axis>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    coefficients: Vec<Complex64>,
}

impl BSplineInterpolator {
    pub fn new(state: &GridState) -> Self {
        let shape = state.shape();
        let fft = FftNd::new(&shape);
        let mut data = state.amplitudes().to_vec();
        fft.forward(&mut data);
        // prefilter: divide by the DFT of the sampled kernel [1, 4, 1] / 6
        let mut idx = vec![0; shape.len()];
        for (flat, v) in data.iter_mut().enumerate() {
            unravel(flat, &shape, &mut idx);
            let mut denom = 1.0;
            for k in 0..shape.len() {
                let w = 2.0 * std::f64::consts::PI * idx[k] as f64 / shape[k] as f64;
                denom *= (4.0 + 2.0 * w.cos()) / 6.0;
            }
            *v /= denom;
        }
        fft.inverse(&mut data);
        Self { axes: state.axes().to_vec(), strides: strides(&shape), shape, coefficients: data }
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }
}

impl Wavefunction for BSplineInterpolator {
    fn dim(&self) -> usize {
        self.axes.len()
    }

    fn value(&self, x: &[f64]) -> Complex64 {
        let d = self.axes.len();
        let mut base = [0isize; 8];
        let mut weights = [[0.0; 4]; 8];
        assert!(d <= 8, "interpolation supports up to 8 axes");
        for k in 0..d {
            let a = &self.axes[k];
            if !(x[k] >= a.min && x[k] < a.max) {
                return Complex64::new(0.0, 0.0);
            }
            let t = (x[k] - a.min) / a.spacing();
            let i = t.floor();
            base[k] = i as isize - 1;
            weights[k] = bspline_weights(t - i);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let taps = 4usize.pow(d as u32);
        for tap in 0..taps {
            let mut w = 1.0;
            let mut flat = 0usize;
            let mut rem = tap;
            for k in 0..d {
                let o = rem % 4;
                rem /= 4;
                w *= weights[k][o];
                let n = self.shape[k] as isize;
                let i = (base[k] + o as isize).rem_euclid(n) as usize;
                flat += i * self.strides[k];
            }
            acc += self.coefficients[flat] * w;
        }
        acc
    }
}
