//! Complex Gaussian exponents `exp(-½ zᵀQz + lᵀz + c)` with `z = x - origin`.
//!
//! Every closed-form quantity of the Gaussian backend (overlaps, partial
//! traces, purities, moments) reduces to products, linear pullbacks and
//! integrals of these. Keeping an explicit origin avoids cancelling large
//! constants when centres sit far from zero.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;

use crate::error::{QrfError, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone)]
pub struct Exponent {
    pub origin: DVector<f64>,
    pub quad: DMatrix<f64>,
    pub lin: DVector<Complex64>,
    pub constant: Complex64,
}

/// Normalised first and second moments of an integrable exponent.
#[derive(Debug, Clone)]
pub struct ExponentMoments {
    pub integral: Complex64,
    /// `E[z]`, relative to the origin.
    pub mean: DVector<Complex64>,
    /// `E[z zᵀ]`, relative to the origin.
    pub second: DMatrix<Complex64>,
}

fn to_complex(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn real_dot(a: &DVector<f64>, b: &DVector<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| y * *x).sum()
}

pub(crate) fn cholesky(q: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(q.clone())
        .ok_or_else(|| QrfError::Linalg("quadratic form is not positive definite".into()))
}

fn solve_complex(chol: &Cholesky<f64, Dyn>, rhs: &DVector<Complex64>) -> DVector<Complex64> {
    let re = chol.solve(&rhs.map(|v| v.re));
    let im = chol.solve(&rhs.map(|v| v.im));
    DVector::from_iterator(rhs.len(), re.iter().zip(im.iter()).map(|(r, i)| Complex64::new(*r, *i)))
}

fn ln_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

impl Exponent {
    pub fn constant_only(value: Complex64) -> Self {
        Self {
            origin: DVector::zeros(0),
            quad: DMatrix::zeros(0, 0),
            lin: DVector::zeros(0),
            constant: value,
        }
    }

    pub fn dim(&self) -> usize {
        self.origin.len()
    }

    pub fn log_value(&self, x: &[f64]) -> Complex64 {
        let z = DVector::from_iterator(self.dim(), x.iter().zip(self.origin.iter()).map(|(a, o)| a - o));
        let qz = &self.quad * &z;
        let quad = -0.5 * z.dot(&qz);
        self.constant + real_dot(&z, &self.lin) + quad
    }

    pub fn value(&self, x: &[f64]) -> Complex64 {
        self.log_value(x).exp()
    }

    pub fn conj(&self) -> Self {
        Self {
            origin: self.origin.clone(),
            quad: self.quad.clone(),
            lin: self.lin.map(|v| v.conj()),
            constant: self.constant.conj(),
        }
    }

    /// Same function expressed around a different origin.
    pub fn reorigin(&self, origin: &DVector<f64>) -> Self {
        let s = origin - &self.origin;
        let qs = &self.quad * &s;
        let lin = &self.lin - to_complex_vec(&qs);
        let constant = self.constant - 0.5 * s.dot(&qs) + real_dot(&s, &self.lin);
        Self { origin: origin.clone(), quad: self.quad.clone(), lin, constant }
    }

    /// Pointwise product, expressed around `self.origin`.
    pub fn mul(&self, other: &Exponent) -> Self {
        let o = other.reorigin(&self.origin);
        Self {
            origin: self.origin.clone(),
            quad: &self.quad + &o.quad,
            lin: &self.lin + &o.lin,
            constant: self.constant + o.constant,
        }
    }

    /// `y ↦ f(M y)`, expressed around `new_origin` in `y` space.
    pub fn pullback(&self, m: &DMatrix<f64>, new_origin: &DVector<f64>) -> Self {
        let s = m * new_origin - &self.origin;
        let qs = &self.quad * &s;
        let shifted_lin = &self.lin - to_complex_vec(&qs);
        let mt = m.transpose();
        let lin = to_complex(&mt) * shifted_lin;
        let quad = &mt * &self.quad * m;
        let constant = self.constant - 0.5 * s.dot(&qs) + real_dot(&s, &self.lin);
        Self { origin: new_origin.clone(), quad: symmetrize(quad), lin, constant }
    }

    pub fn add_constant(&mut self, c: Complex64) {
        self.constant += c;
    }

    /// Integral over all variables.
    pub fn integrate(&self) -> Result<Complex64> {
        let n = self.dim();
        if n == 0 {
            return Ok(self.constant.exp());
        }
        let chol = cholesky(&self.quad)?;
        let sol = solve_complex(&chol, &self.lin);
        let lql: Complex64 = self.lin.iter().zip(sol.iter()).map(|(a, b)| a * b).sum();
        let log = self.constant + 0.5 * lql + 0.5 * (n as f64) * LN_2PI - 0.5 * ln_det(&chol);
        Ok(log.exp())
    }

    /// Integrate the listed variables out, leaving an exponent over the rest
    /// (in their original order).
    pub fn integrate_out(&self, traced: &[usize]) -> Result<Exponent> {
        let n = self.dim();
        let kept: Vec<usize> = (0..n).filter(|i| !traced.contains(i)).collect();
        if traced.is_empty() {
            return Ok(self.clone());
        }
        let qss = select(&self.quad, traced, traced);
        let qsr = select(&self.quad, traced, &kept);
        let qrr = select(&self.quad, &kept, &kept);
        let ls = DVector::from_iterator(traced.len(), traced.iter().map(|&i| self.lin[i]));
        let lr = DVector::from_iterator(kept.len(), kept.iter().map(|&i| self.lin[i]));
        let chol = cholesky(&qss)?;
        let inv_qsr = chol.solve(&qsr);
        let quad = symmetrize(qrr - qsr.transpose() * &inv_qsr);
        let sol = solve_complex(&chol, &ls);
        let lin = lr - to_complex(&inv_qsr.transpose()) * &ls;
        let lql: Complex64 = ls.iter().zip(sol.iter()).map(|(a, b)| a * b).sum();
        let constant = self.constant + 0.5 * lql + 0.5 * (traced.len() as f64) * LN_2PI
            - 0.5 * ln_det(&chol);
        let origin = DVector::from_iterator(kept.len(), kept.iter().map(|&i| self.origin[i]));
        Ok(Exponent { origin, quad, lin, constant })
    }

    pub fn moments(&self) -> Result<ExponentMoments> {
        let chol = cholesky(&self.quad)?;
        let integral = self.integrate()?;
        let mean = solve_complex(&chol, &self.lin);
        let inv = to_complex(&chol.inverse());
        let second = inv + &mean * mean.transpose();
        Ok(ExponentMoments { integral, mean, second })
    }
}

fn to_complex_vec(v: &DVector<f64>) -> DVector<Complex64> {
    v.map(|x| Complex64::new(x, 0.0))
}

fn select(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

pub(crate) fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}
