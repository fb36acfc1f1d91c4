//! Test-side oracles that share no numerics with the library: a direct
//! Gaussian evaluator and brute-force quadratures on explicit point lists.
#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64 as C;

/// One packet `c Π (2πw²)^{-1/4} exp(−(x−a)²/4w² + i k (x−a)/ħ)`.
#[derive(Clone, Debug)]
pub struct Packet {
    pub c: C,
    pub a: Vec<f64>,
    pub w: Vec<f64>,
    pub k: Vec<f64>,
}

impl Packet {
    pub fn real(c: C, a: &[f64], w: &[f64]) -> Self {
        Self { c, a: a.to_vec(), w: w.to_vec(), k: vec![0.0; a.len()] }
    }
}

/// Unnormalised superposition of axis-aligned packets in absolute coordinates.
#[derive(Clone, Debug)]
pub struct Psi {
    pub packets: Vec<Packet>,
    pub hbar: f64,
}

impl Psi {
    pub fn new(packets: Vec<Packet>) -> Self {
        Self { packets, hbar: 1.0 }
    }

    pub fn eval(&self, x: &[f64]) -> C {
        let mut sum = C::new(0.0, 0.0);
        for p in &self.packets {
            let mut e = C::new(0.0, 0.0);
            let mut norm = 1.0;
            for i in 0..x.len() {
                let d = x[i] - p.a[i];
                e += C::new(-d * d / (4.0 * p.w[i] * p.w[i]), p.k[i] * d / self.hbar);
                norm *= (2.0 * std::f64::consts::PI * p.w[i] * p.w[i]).powf(-0.25);
            }
            sum += p.c * norm * e.exp();
        }
        sum
    }
}

/// `n` equally spaced points `lo + i h`, `h = (hi − lo)/n` (periodic-grid convention).
pub fn points(lo: f64, hi: f64, n: usize) -> (Vec<f64>, f64) {
    let h = (hi - lo) / n as f64;
    ((0..n).map(|i| lo + i as f64 * h).collect(), h)
}

/// Absolute positions from `(X, χ_1..χ_N)`: `x_0 = X − Σ m_k χ_k / M`, `x_j = x_0 + χ_j`.
pub fn from_cm_relative(masses: &[f64], cm: f64, chi: &[f64]) -> Vec<f64> {
    let total: f64 = masses.iter().sum();
    let x0 = cm - chi.iter().zip(&masses[1..]).map(|(c, m)| c * m).sum::<f64>() / total;
    std::iter::once(x0).chain(chi.iter().map(|c| x0 + c)).collect()
}

/// Matrix `ρ(i, i′) = Σ_u f(u, i) f*(u, i′) du`, normalised to unit trace on `dv`.
pub fn reduced_from_rows(rows: &[Vec<C>], du: f64, dv: f64) -> DMatrix<C> {
    let n = rows[0].len();
    let mut rho = DMatrix::from_element(n, n, C::new(0.0, 0.0));
    for r in rows {
        for i in 0..n {
            let ri = r[i];
            for j in 0..n {
                rho[(i, j)] += ri * r[j].conj();
            }
        }
    }
    rho *= C::new(du, 0.0);
    let tr: f64 = rho.diagonal().iter().map(|v| v.re).sum::<f64>() * dv;
    rho / C::new(tr, 0.0)
}

/// `ρ_r(χ, χ′) = ∫ dX ψ̃(X, χ) ψ̃*(X, χ′)` on the tensor grid of `chi_axes`.
pub fn relative_density(psi: &Psi, masses: &[f64], cm: &[f64], dcm: f64, chi_axes: &[(Vec<f64>, f64)]) -> DMatrix<C> {
    let chis = tensor(chi_axes);
    let dv: f64 = chi_axes.iter().map(|a| a.1).product();
    let rows: Vec<Vec<C>> =
        cm.iter().map(|&x| chis.iter().map(|chi| psi.eval(&from_cm_relative(masses, x, chi))).collect()).collect();
    reduced_from_rows(&rows, dcm, dv)
}

/// `ρ_k(x, x′)` for particle `k` of a two-particle state, tracing the other on `other`.
pub fn external_density(psi: &Psi, keep: usize, axis: &(Vec<f64>, f64), other: &(Vec<f64>, f64)) -> DMatrix<C> {
    let rows: Vec<Vec<C>> = other
        .0
        .iter()
        .map(|&u| {
            axis.0
                .iter()
                .map(|&x| if keep == 1 { psi.eval(&[u, x]) } else { psi.eval(&[x, u]) })
                .collect()
        })
        .collect();
    reduced_from_rows(&rows, other.1, axis.1)
}

/// Row-major tensor product of point lists.
pub fn tensor(axes: &[(Vec<f64>, f64)]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for (pts, _) in axes {
        out = out.into_iter().flat_map(|prefix| pts.iter().map(move |p| [prefix.clone(), vec![*p]].concat())).collect();
    }
    out
}

pub fn purity(rho: &DMatrix<C>, dv: f64) -> f64 {
    rho.iter().map(|v| v.norm_sqr()).sum::<f64>() * dv * dv
}

/// `½ Σ |eig((ρ − σ) dv)|` with a Hermitian eigensolver.
pub fn trace_distance(rho: &DMatrix<C>, sigma: &DMatrix<C>, dv: f64) -> f64 {
    let d = (rho - sigma) * C::new(dv, 0.0);
    let d = (&d + d.adjoint()) * C::new(0.5, 0.0);
    0.5 * nalgebra::SymmetricEigen::new(d).eigenvalues.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn max_abs_diff(a: &DMatrix<C>, b: &DMatrix<C>) -> f64 {
    (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// `‖S J Sᵀ − J‖∞` for `S = diag(A, B)` acting on `(x, p)`.
pub fn symplectic_residual(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
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
