use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SPACING_RTOL: f64 = 1e-9;

/// Uniform sampling grid on a sub-interval of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    points: Vec<f64>,
    spacing: f64,
}

impl Grid {
    /// `m` equispaced points from `start` to `end` inclusive.
    pub fn uniform(m: usize, start: f64, end: f64) -> Result<Self> {
        if m < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points, got {m}")));
        }
        let spacing = (end - start) / (m - 1) as f64;
        let points = (0..m).map(|i| start + spacing * i as f64).collect();
        Self::new(points)
    }

    pub fn unit(m: usize) -> Result<Self> {
        Self::uniform(m, 0.0, 1.0)
    }

    pub fn new(points: Vec<f64>) -> Result<Self> {
        let m = points.len();
        if m < 3 {
            return Err(Error::InvalidGrid(format!("need at least 3 points, got {m}")));
        }
        if points.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidGrid("non-finite abscissa".into()));
        }
        if points[0] < -1e-12 || points[m - 1] > 1.0 + 1e-12 {
            return Err(Error::InvalidGrid(format!(
                "abscissae must lie in [0, 1], got [{}, {}]",
                points[0],
                points[m - 1]
            )));
        }
        let spacing = (points[m - 1] - points[0]) / (m - 1) as f64;
        if spacing <= 0.0 {
            return Err(Error::InvalidGrid("points are not strictly increasing".into()));
        }
        for (i, w) in points.windows(2).enumerate() {
            let step = w[1] - w[0];
            if step <= 0.0 {
                return Err(Error::InvalidGrid(format!(
                    "points are not strictly increasing at index {}",
                    i + 1
                )));
            }
            if ((step - spacing) / spacing).abs() > SPACING_RTOL {
                return Err(Error::InvalidGrid(format!(
                    "non-uniform spacing at index {}: {step} vs {spacing}",
                    i + 1
                )));
            }
        }
        Ok(Grid { points, spacing })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn start(&self) -> f64 {
        self.points[0]
    }

    pub fn end(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Trapezoid quadrature weights.
    pub fn weights(&self) -> Vec<f64> {
        let m = self.points.len();
        let mut w = vec![self.spacing; m];
        w[0] *= 0.5;
        w[m - 1] *= 0.5;
        w
    }

    /// Trapezoid inner product of two sampled functions.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), self.len());
        debug_assert_eq!(b.len(), self.len());
        let m = a.len();
        let interior: f64 = (1..m - 1).map(|i| a[i] * b[i]).sum();
        self.spacing * (interior + 0.5 * (a[0] * b[0] + a[m - 1] * b[m - 1]))
    }

    pub fn norm(&self, a: &[f64]) -> f64 {
        self.inner(a, a).max(0.0).sqrt()
    }

    /// Tensor-product trapezoid norm of an `m x m` surface.
    pub fn surface_norm(&self, s: &nalgebra::DMatrix<f64>) -> f64 {
        let w = self.weights();
        let mut acc = 0.0;
        for c in 0..s.ncols() {
            for r in 0..s.nrows() {
                acc += w[r] * w[c] * s[(r, c)] * s[(r, c)];
            }
        }
        acc.max(0.0).sqrt()
    }

    pub fn approx_eq(&self, other: &Grid) -> bool {
        self.points.len() == other.points.len()
            && self
                .points
                .iter()
                .zip(&other.points)
                .all(|(a, b)| (a - b).abs() <= 1e-12)
    }
}
