//! Fitted function-on-function model on the original scale.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::functional::{CurveSet, Grid};

/// `Y(t) = a(t) + sum_j int S_j(s, t) X_j(s) ds` over the selected features.
///
/// Surfaces are `m x m` with rows indexed by the feature argument `s` and
/// columns by the response argument `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalModel {
    grid: Grid,
    p: usize,
    selected: Vec<usize>,
    surfaces: Vec<DMatrix<f64>>,
    intercept: Vec<f64>,
}

impl FunctionalModel {
    pub fn new(
        grid: Grid,
        p: usize,
        selected: Vec<usize>,
        surfaces: Vec<DMatrix<f64>>,
        intercept: Vec<f64>,
    ) -> Result<Self> {
        let m = grid.len();
        if selected.len() != surfaces.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} selected features but {} surfaces",
                selected.len(),
                surfaces.len()
            )));
        }
        if selected.iter().any(|&j| j >= p) {
            return Err(Error::DimensionMismatch("selected index out of range".into()));
        }
        if surfaces.iter().any(|s| s.shape() != (m, m)) || intercept.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "surfaces must be {m}x{m} and the intercept of length {m}"
            )));
        }
        Ok(FunctionalModel {
            grid,
            p,
            selected,
            surfaces,
            intercept,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn surfaces(&self) -> &[DMatrix<f64>] {
        &self.surfaces
    }

    pub fn intercept(&self) -> &[f64] {
        &self.intercept
    }

    pub fn surface(&self, j: usize) -> Option<&DMatrix<f64>> {
        self.selected
            .iter()
            .position(|&s| s == j)
            .map(|pos| &self.surfaces[pos])
    }

    /// Predicted response curves (`n x m`) for the full list of `p` features.
    pub fn predict(&self, features: &[CurveSet]) -> Result<DMatrix<f64>> {
        if features.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "model has {} features, {} supplied",
                self.p,
                features.len()
            )));
        }
        let n = features.first().map(|f| f.n()).unwrap_or(0);
        let w = self.grid.weights();
        let mut out = DMatrix::from_fn(n, self.grid.len(), |_, c| self.intercept[c]);
        for (&j, s) in self.selected.iter().zip(&self.surfaces) {
            let f = &features[j];
            if !f.grid().approx_eq(&self.grid) {
                return Err(Error::GridMismatch);
            }
            if f.n() != n {
                return Err(Error::DimensionMismatch("features differ in sample size".into()));
            }
            let mut xw = f.values().clone();
            for (c, mut col) in xw.column_iter_mut().enumerate() {
                col *= w[c];
            }
            out.gemm(1.0, &xw, s, 1.0);
        }
        Ok(out)
    }
}

/// Fitted scalar-on-function model `y = a + sum_j int beta_j(s) X_j(s) ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarModel {
    grid: Grid,
    p: usize,
    selected: Vec<usize>,
    curves: Vec<Vec<f64>>,
    intercept: f64,
}

impl ScalarModel {
    pub fn new(
        grid: Grid,
        p: usize,
        selected: Vec<usize>,
        curves: Vec<Vec<f64>>,
        intercept: f64,
    ) -> Result<Self> {
        if selected.len() != curves.len()
            || selected.iter().any(|&j| j >= p)
            || curves.iter().any(|c| c.len() != grid.len())
        {
            return Err(Error::DimensionMismatch(
                "coefficient curves do not match the selection or grid".into(),
            ));
        }
        Ok(ScalarModel {
            grid,
            p,
            selected,
            curves,
            intercept,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn curves(&self) -> &[Vec<f64>] {
        &self.curves
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn predict(&self, features: &[CurveSet]) -> Result<Vec<f64>> {
        if features.len() != self.p {
            return Err(Error::DimensionMismatch(format!(
                "model has {} features, {} supplied",
                self.p,
                features.len()
            )));
        }
        let n = features.first().map(|f| f.n()).unwrap_or(0);
        let mut out = vec![self.intercept; n];
        for (&j, beta) in self.selected.iter().zip(&self.curves) {
            let f = &features[j];
            if !f.grid().approx_eq(&self.grid) {
                return Err(Error::GridMismatch);
            }
            for (i, o) in out.iter_mut().enumerate() {
                *o += self.grid.inner(&f.curve(i), beta);
            }
        }
        Ok(out)
    }
}
