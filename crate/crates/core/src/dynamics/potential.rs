//! Pair potentials built from coordinate differences.

use serde::{Deserialize, Serialize};

use crate::error::{QrfError, Result};

/// Natural cubic spline through `(x, y)`; constant beyond the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineTable", into = "SplineTable")]
pub struct Spline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SplineTable {
    x: Vec<f64>,
    y: Vec<f64>,
}

impl TryFrom<SplineTable> for Spline {
    type Error = QrfError;
    fn try_from(t: SplineTable) -> Result<Self> {
        Spline::new(t.x, t.y)
    }
}

impl From<Spline> for SplineTable {
    fn from(s: Spline) -> Self {
        SplineTable { x: s.x, y: s.y }
    }
}

impl Spline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n < 3 || y.len() != n {
            return Err(QrfError::InvalidArgument("spline needs at least three (x, y) pairs".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(QrfError::InvalidArgument("spline abscissae must increase".into()));
        }
        // second derivatives from the tridiagonal system, m_0 = m_{n-1} = 0
        let mut m = vec![0.0; n];
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            let r = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
            let diag = 2.0 * (h0 + h1) - h0 * c[i - 1];
            c[i] = h1 / diag;
            d[i] = (r - h0 * d[i - 1]) / diag;
        }
        for i in (1..n - 1).rev() {
            m[i] = d[i] - c[i] * m[i + 1];
        }
        Ok(Self { x, y, m })
    }

    fn segment(&self, u: f64) -> usize {
        self.x.partition_point(|&v| v <= u).clamp(1, self.x.len() - 1) - 1
    }

    pub fn value(&self, u: f64) -> f64 {
        let n = self.x.len();
        if u <= self.x[0] {
            return self.y[0];
        }
        if u >= self.x[n - 1] {
            return self.y[n - 1];
        }
        let i = self.segment(u);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - u) / h;
        let b = (u - self.x[i]) / h;
        a * self.y[i] + b * self.y[i + 1] + ((a.powi(3) - a) * self.m[i] + (b.powi(3) - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn derivative(&self, u: f64) -> f64 {
        let n = self.x.len();
        if u <= self.x[0] || u >= self.x[n - 1] {
            return 0.0;
        }
        let i = self.segment(u);
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - u) / h;
        let b = (u - self.x[i]) / h;
        (self.y[i + 1] - self.y[i]) / h - (3.0 * a * a - 1.0) * h * self.m[i] / 6.0
            + (3.0 * b * b - 1.0) * h * self.m[i + 1] / 6.0
    }

    pub fn second_derivative(&self, u: f64) -> f64 {
        let n = self.x.len();
        if u <= self.x[0] || u >= self.x[n - 1] {
            return 0.0;
        }
        let i = self.segment(u);
        let h = self.x[i + 1] - self.x[i];
        ((self.x[i + 1] - u) * self.m[i] + (u - self.x[i]) * self.m[i + 1]) / h
    }
}

/// Shape of a pair interaction as a function of the separation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case")]
pub enum Profile {
    /// `k u² / 2`
    Harmonic { k: f64 },
    /// `−V₀ exp(−u² / 2w²)`
    GaussianWell { depth: f64, width: f64 },
    Tabulated(Spline),
}

impl Profile {
    pub fn value(&self, u: f64) -> f64 {
        match self {
            Profile::Harmonic { k } => 0.5 * k * u * u,
            Profile::GaussianWell { depth, width } => -depth * (-u * u / (2.0 * width * width)).exp(),
            Profile::Tabulated(s) => s.value(u),
        }
    }

    pub fn derivative(&self, u: f64) -> f64 {
        match self {
            Profile::Harmonic { k } => k * u,
            Profile::GaussianWell { depth, width } => {
                depth * u / (width * width) * (-u * u / (2.0 * width * width)).exp()
            }
            Profile::Tabulated(s) => s.derivative(u),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Profile::GaussianWell { width, .. } if !(*width > 0.0) => {
                Err(QrfError::InvalidArgument(format!("well width {width} must be positive")))
            }
            _ => Ok(()),
        }
    }
}

/// `V(x_j − x_i)` between particles `i < j`; particle 0 is the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTerm {
    pub i: usize,
    pub j: usize,
    pub profile: Profile,
}

/// Sum of pair terms over `n_particles` particles.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub terms: Vec<PairTerm>,
}

impl PotentialSpec {
    pub fn free() -> Self {
        Self::default()
    }

    pub fn with_term(mut self, i: usize, j: usize, profile: Profile) -> Self {
        self.terms.push(PairTerm { i, j, profile });
        self
    }

    pub fn is_free(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn validate(&self, n_particles: usize) -> Result<()> {
        for t in &self.terms {
            if !(t.i < t.j && t.j < n_particles) {
                return Err(QrfError::InvalidArgument(format!(
                    "pair ({}, {}) invalid for {n_particles} particles",
                    t.i, t.j
                )));
            }
            t.profile.validate()?;
        }
        Ok(())
    }

    /// Value at relative positions `x_r` (frame particle at the origin).
    pub fn relative_value(&self, xr: &[f64]) -> f64 {
        let pos = |i: usize| if i == 0 { 0.0 } else { xr[i - 1] };
        self.terms.iter().map(|t| t.profile.value(pos(t.j) - pos(t.i))).sum()
    }

    /// `∂V/∂x_rj` for every relative coordinate.
    pub fn relative_gradient(&self, xr: &[f64]) -> Vec<f64> {
        let pos = |i: usize| if i == 0 { 0.0 } else { xr[i - 1] };
        let mut g = vec![0.0; xr.len()];
        for t in &self.terms {
            let d = t.profile.derivative(pos(t.j) - pos(t.i));
            g[t.j - 1] += d;
            if t.i > 0 {
                g[t.i - 1] -= d;
            }
        }
        g
    }

    pub fn absolute_value(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|t| t.profile.value(x[t.j] - x[t.i])).sum()
    }

    pub fn absolute_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; x.len()];
        for t in &self.terms {
            let d = t.profile.derivative(x[t.j] - x[t.i]);
            g[t.j] += d;
            g[t.i] -= d;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spline_reproduces_cubic_interior() {
        let x: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let s = Spline::new(x, y).unwrap();
        for u in [-1.23, 0.0, 0.57, 1.4] {
            assert!((s.value(u) - f64::sin(u)).abs() < 1e-5);
            assert!((s.derivative(u) - f64::cos(u)).abs() < 1e-3);
        }
        assert!(Spline::new(vec![0.0, 0.0, 1.0], vec![1.0; 3]).is_err());
    }

    #[test]
    fn gradient_matches_difference_quotient() {
        let v = PotentialSpec::free()
            .with_term(0, 1, Profile::Harmonic { k: 2.0 })
            .with_term(1, 2, Profile::GaussianWell { depth: 1.5, width: 0.7 })
            .with_term(0, 2, Profile::GaussianWell { depth: 0.5, width: 1.1 });
        let xr = [0.3, -0.8];
        let g = v.relative_gradient(&xr);
        let h = 1e-6;
        for k in 0..2 {
            let mut a = xr;
            let mut b = xr;
            a[k] += h;
            b[k] -= h;
            let fd = (v.relative_value(&a) - v.relative_value(&b)) / (2.0 * h);
            assert!((g[k] - fd).abs() < 1e-8);
        }
        // translation invariance of the absolute form
        let x = [0.1, 0.4, -0.7];
        let y = [1.1, 1.4, 0.3];
        assert!((v.absolute_value(&x) - v.absolute_value(&y)).abs() < 1e-14);
        assert!(v.absolute_gradient(&x).iter().sum::<f64>().abs() < 1e-14);
        assert!((v.absolute_value(&x) - v.relative_value(&[0.3, -0.8])).abs() < 1e-14);
    }

    #[test]
    fn profile_json_round_trip() {
        let v = PotentialSpec::free()
            .with_term(0, 1, Profile::Tabulated(Spline::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 4.0]).unwrap()));
        let text = serde_json::to_string(&v).unwrap();
        let back: PotentialSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(v, back);
    }
}
