use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Grid;
use crate::error::{Error, Result};

/// Smallest pointwise standard deviation accepted by [`standardize`].
pub const MIN_POINTWISE_SD: f64 = 1e-12;

/// `n` curves sampled on a shared grid; rows are curves.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet {
    values: DMatrix<f64>,
    grid: Grid,
}

impl CurveSet {
    pub fn new(values: DMatrix<f64>, grid: Grid) -> Result<Self> {
        if values.ncols() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} columns for a grid of {} points",
                values.ncols(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format("curve values must be finite".into()));
        }
        Ok(CurveSet { values, grid })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_values(self) -> DMatrix<f64> {
        self.values
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn m(&self) -> usize {
        self.values.ncols()
    }

    pub fn curve(&self, i: usize) -> Vec<f64> {
        self.values.row(i).iter().copied().collect()
    }

    /// Keeps the rows listed in `rows`, in that order.
    pub fn select_rows(&self, rows: &[usize]) -> CurveSet {
        CurveSet {
            values: self.values.select_rows(rows),
            grid: self.grid.clone(),
        }
    }

    pub fn ensure_same_grid(&self, other: &CurveSet) -> Result<()> {
        if self.grid.approx_eq(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Pointwise mean and standard deviation used to standardize one variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationRecord {
    pub ave: Vec<f64>,
    pub sd: Vec<f64>,
}

impl StandardizationRecord {
    /// Applies this record to new curves (e.g. a test set).
    pub fn apply(&self, curves: &CurveSet) -> Result<CurveSet> {
        if curves.m() != self.ave.len() {
            return Err(Error::DimensionMismatch(format!(
                "record has {} points, curves have {}",
                self.ave.len(),
                curves.m()
            )));
        }
        let mut values = curves.values.clone();
        for (c, mut col) in values.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = (*v - self.ave[c]) / self.sd[c];
            }
        }
        Ok(CurveSet {
            values,
            grid: curves.grid.clone(),
        })
    }

    /// Maps standardized curves back to the original scale.
    pub fn invert(&self, values: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = values.clone();
        for (c, mut col) in out.column_iter_mut().enumerate() {
            for v in col.iter_mut() {
                *v = *v * self.sd[c] + self.ave[c];
            }
        }
        out
    }
}

/// Pointwise standardization `(v(t) - ave(t)) / sd(t)` with the population
/// standard deviation.
pub fn standardize(curves: &CurveSet) -> Result<(CurveSet, StandardizationRecord)> {
    let n = curves.n();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "standardization needs at least 2 curves, got {n}"
        )));
    }
    let m = curves.m();
    let mut ave = vec![0.0; m];
    let mut sd = vec![0.0; m];
    for (c, col) in curves.values.column_iter().enumerate() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let s = var.sqrt();
        if !(s >= MIN_POINTWISE_SD) {
            return Err(Error::DegenerateVariance { index: c, sd: s });
        }
        ave[c] = mean;
        sd[c] = s;
    }
    let record = StandardizationRecord { ave, sd };
    let out = record.apply(curves)?;
    Ok((out, record))
}
