//! Coordinate labels and their relation to the absolute particle positions.

use std::collections::HashSet;
use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{QrfError, Result};
use crate::mass::MassConfig;

/// A position coordinate together with the name of its conjugate momentum.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CoordLabel {
    pub position: String,
    pub momentum: String,
}

impl CoordLabel {
    pub fn new(position: impl Into<String>, momentum: impl Into<String>) -> Self {
        Self { position: position.into(), momentum: momentum.into() }
    }
}

/// Ordered coordinate labels plus the linear map from absolute particle
/// positions `x_0..x_N` to these coordinates (one row per coordinate).
///
/// Relative-only frames (centre of mass factored out) have fewer rows than
/// particles; every other frame is square and invertible.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoordinateFrame {
    labels: Vec<CoordLabel>,
    from_absolute: DMatrix<f64>,
}

impl PartialEq for CoordinateFrame {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
            && self.from_absolute.shape() == other.from_absolute.shape()
            && self
                .from_absolute
                .iter()
                .zip(other.from_absolute.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs())))
    }
}

impl fmt::Display for CoordinateFrame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.labels.iter().map(|l| l.position.as_str()).collect();
        write!(f, "{}", names.join(", "))
    }
}

impl CoordinateFrame {
    pub fn new(labels: Vec<CoordLabel>, from_absolute: DMatrix<f64>) -> Result<Self> {
        if labels.len() != from_absolute.nrows() {
            return Err(QrfError::InvalidFrame(format!(
                "{} labels for a map with {} rows",
                labels.len(),
                from_absolute.nrows()
            )));
        }
        let mut names = HashSet::new();
        for l in &labels {
            if l.position == l.momentum {
                return Err(QrfError::InvalidFrame(format!(
                    "`{}` used as its own conjugate",
                    l.position
                )));
            }
            if !names.insert(l.position.clone()) || !names.insert(l.momentum.clone()) {
                return Err(QrfError::InvalidFrame(format!(
                    "duplicate label in ({}, {})",
                    l.position, l.momentum
                )));
            }
        }
        Ok(Self { labels, from_absolute })
    }

    /// Particle positions `x_i` with momenta `p_i`.
    pub fn absolute(n_particles: usize) -> Self {
        let labels = (0..n_particles)
            .map(|i| CoordLabel::new(format!("x{i}"), format!("p{i}")))
            .collect();
        Self { labels, from_absolute: DMatrix::identity(n_particles, n_particles) }
    }

    /// `(x_cm, x_r1..x_rN)` with conjugates `(p_cm, π_1..π_N)`.
    pub fn cm_relative(masses: &MassConfig) -> Self {
        let n = masses.len();
        let total = masses.total();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(0, i)] = masses.mass(i) / total;
        }
        for j in 1..n {
            a[(j, 0)] = -1.0;
            a[(j, j)] = 1.0;
        }
        let mut labels = vec![CoordLabel::new("x_cm", "p_cm")];
        labels.extend((1..n).map(|j| CoordLabel::new(format!("x_r{j}"), format!("pi_{j}"))));
        Self { labels, from_absolute: a }
    }

    /// `(x_r1..x_rN)` alone, the frame of a state with the centre of mass factored out.
    pub fn relative_only(masses: &MassConfig) -> Self {
        let n = masses.len();
        let mut a = DMatrix::zeros(n - 1, n);
        for j in 1..n {
            a[(j - 1, 0)] = -1.0;
            a[(j - 1, j)] = 1.0;
        }
        let labels = (1..n)
            .map(|j| CoordLabel::new(format!("x_r{j}"), format!("pi_{j}")))
            .collect();
        Self { labels, from_absolute: a }
    }

    /// Positions `x'_k` relative to a classical origin, conjugate to `p'_k`.
    pub fn classical(n_particles: usize) -> Self {
        let labels = (1..=n_particles)
            .map(|k| CoordLabel::new(format!("x'{k}"), format!("p'{k}")))
            .collect();
        Self { labels, from_absolute: DMatrix::identity(n_particles, n_particles) }
    }

    pub fn labels(&self) -> &[CoordLabel] {
        &self.labels
    }

    pub fn position_labels(&self) -> Vec<String> {
        self.labels.iter().map(|l| l.position.clone()).collect()
    }

    pub fn dim(&self) -> usize {
        self.labels.len()
    }

    pub fn n_particles(&self) -> usize {
        self.from_absolute.ncols()
    }

    pub fn from_absolute(&self) -> &DMatrix<f64> {
        &self.from_absolute
    }

    pub fn is_square(&self) -> bool {
        self.from_absolute.is_square()
    }

    pub fn index_of(&self, position_label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l.position == position_label)
    }

    pub fn is_absolute(&self) -> bool {
        *self == Self::absolute(self.n_particles())
    }

    /// True when the first coordinate is `x_cm` and the rest are `x_rj`.
    pub fn is_cm_relative(&self) -> bool {
        self.labels.first().map(|l| l.position.as_str()) == Some("x_cm")
            && self.labels[1..].iter().enumerate().all(|(k, l)| l.position == format!("x_r{}", k + 1))
    }

    pub fn expect(&self, other: &CoordinateFrame) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(QrfError::FrameMismatch { expected: other.to_string(), found: self.to_string() })
        }
    }

    /// Same map under new labels.
    pub fn relabeled(&self, labels: Vec<CoordLabel>) -> Result<Self> {
        Self::new(labels, self.from_absolute.clone())
    }

    /// Same labels under a new map.
    pub fn with_map(&self, from_absolute: DMatrix<f64>) -> Result<Self> {
        Self::new(self.labels.clone(), from_absolute)
    }
}
