use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{CurveSet, Grid};
use crate::error::{Error, Result};

/// Default cap on the number of components. Solver cost grows like `k^6`.
pub const DEFAULT_K_MAX: usize = 10;

/// Eigenvalues below this fraction of the leading one count as zero.
const POSITIVE_EIGEN_RTOL: f64 = 1e-10;

/// Leading eigenfunctions of a curve sample's covariance operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FpcBasis {
    /// `m x k`; column `a` is eigenfunction `e_a` on the grid.
    functions: DMatrix<f64>,
    eigenvalues: Vec<f64>,
    /// Cumulative explained-variance ratios.
    explained_variance: Vec<f64>,
    grid: Grid,
}

impl FpcBasis {
    /// Wraps user-supplied basis functions; they are assumed quadrature-orthonormal.
    pub fn from_parts(
        functions: DMatrix<f64>,
        eigenvalues: Vec<f64>,
        explained_variance: Vec<f64>,
        grid: Grid,
    ) -> Result<Self> {
        let k = functions.ncols();
        if functions.nrows() != grid.len() || eigenvalues.len() != k || explained_variance.len() != k
        {
            return Err(Error::DimensionMismatch("basis parts disagree in size".into()));
        }
        Ok(FpcBasis {
            functions,
            eigenvalues,
            explained_variance,
            grid,
        })
    }

    pub fn k(&self) -> usize {
        self.functions.ncols()
    }

    pub fn functions(&self) -> &DMatrix<f64> {
        &self.functions
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Keeps the first `k` components.
    pub fn truncate(&self, k: usize) -> Result<FpcBasis> {
        if k == 0 || k > self.k() {
            return Err(Error::RankDeficient {
                available: self.k(),
                requested: k,
            });
        }
        Ok(FpcBasis {
            functions: self.functions.columns(0, k).into_owned(),
            eigenvalues: self.eigenvalues[..k].to_vec(),
            explained_variance: self.explained_variance[..k].to_vec(),
            grid: self.grid.clone(),
        })
    }

    /// Quadrature Gram matrix of the basis functions (identity for a valid basis).
    pub fn gram(&self) -> DMatrix<f64> {
        let w = self.grid.weights();
        let mut we = self.functions.clone();
        for (r, mut row) in we.row_iter_mut().enumerate() {
            row *= w[r];
        }
        self.functions.transpose() * we
    }

    /// Curves `scores * e^T` on the grid; `scores` is `n x k`.
    pub fn curves_from_scores(&self, scores: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if scores.ncols() != self.k() {
            return Err(Error::DimensionMismatch(format!(
                "scores have {} columns, basis has {} functions",
                scores.ncols(),
                self.k()
            )));
        }
        Ok(scores * self.functions.transpose())
    }
}

/// Full spectrum of the quadrature-weighted second-moment operator, restricted
/// to strictly positive eigenvalues and sorted in decreasing order.
fn spectrum(curves: &CurveSet, cap: usize) -> Result<FpcBasis> {
    let n = curves.n();
    let m = curves.m();
    let grid = curves.grid().clone();
    let w = grid.weights();
    let x = curves.values();

    // (eigenvalue, eigenfunction on grid)
    let mut pairs: Vec<(f64, Vec<f64>)>;
    let total: f64;
    if n < m {
        // Gram route: (1/n) X W X^T g = lambda g, e = X^T g / sqrt(n lambda).
        let mut xw = x.clone();
        for (c, mut col) in xw.column_iter_mut().enumerate() {
            col *= w[c];
        }
        let gram = (&xw * x.transpose()) / n as f64;
        let gram = symmetrize(gram);
        total = gram.trace();
        let eig = SymmetricEigen::new(gram);
        pairs = (0..n)
            .map(|i| {
                let lambda = eig.eigenvalues[i];
                let g = eig.eigenvectors.column(i);
                let scale = if lambda > 0.0 {
                    1.0 / (n as f64 * lambda).sqrt()
                } else {
                    0.0
                };
                let e: Vec<f64> = (x.transpose() * g).iter().map(|v| v * scale).collect();
                (lambda, e)
            })
            .collect();
    } else {
        // Covariance route on W^{1/2} C W^{1/2}, e = W^{-1/2} f.
        let sw: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let mut a = x.clone();
        for (c, mut col) in a.column_iter_mut().enumerate() {
            col *= sw[c];
        }
        let cov = symmetrize((a.transpose() * &a) / n as f64);
        total = cov.trace();
        let eig = SymmetricEigen::new(cov);
        pairs = (0..m)
            .map(|i| {
                let f = eig.eigenvectors.column(i);
                let e: Vec<f64> = f.iter().zip(&sw).map(|(v, s)| v / s).collect();
                (eig.eigenvalues[i], e)
            })
            .collect();
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));

    let leading = pairs.first().map(|p| p.0).unwrap_or(0.0);
    if !(leading > 0.0) || !(total > 0.0) {
        return Err(Error::RankDeficient {
            available: 0,
            requested: 1,
        });
    }
    let positive = pairs
        .iter()
        .take_while(|p| p.0 > POSITIVE_EIGEN_RTOL * leading)
        .count();
    let k = positive.min(cap);

    let mut functions = DMatrix::zeros(m, k);
    let mut eigenvalues = Vec::with_capacity(k);
    let mut explained = Vec::with_capacity(k);
    let mut cum = 0.0;
    for (a, (lambda, mut e)) in pairs.into_iter().take(k).enumerate() {
        // Re-normalize in the quadrature metric and fix the sign so the
        // largest-magnitude entry is positive.
        let norm = grid.norm(&e);
        let pivot = e
            .iter()
            .copied()
            .fold(0.0f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        let s = if pivot < 0.0 { -1.0 } else { 1.0 } / norm;
        e.iter_mut().for_each(|v| *v *= s);
        functions.set_column(a, &nalgebra::DVector::from_vec(e));
        eigenvalues.push(lambda);
        cum += lambda;
        explained.push((cum / total).min(1.0));
    }
    FpcBasis::from_parts(functions, eigenvalues, explained, grid)
}

fn symmetrize(a: DMatrix<f64>) -> DMatrix<f64> {
    (&a + a.transpose()) * 0.5
}

/// Smallest basis whose cumulative explained variance reaches
/// `variance_threshold`, capped at `k_max`.
pub fn compute_fpc(curves: &CurveSet, variance_threshold: f64, k_max: usize) -> Result<FpcBasis> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "variance threshold must lie in (0, 1], got {variance_threshold}"
        )));
    }
    if k_max == 0 || k_max > curves.n().min(curves.m()) {
        return Err(Error::InvalidParameter(format!(
            "k_max must lie in [1, min(n, m)] = [1, {}], got {k_max}",
            curves.n().min(curves.m())
        )));
    }
    let full = spectrum(curves, k_max)?;
    let k = full
        .explained_variance
        .iter()
        .position(|&c| c >= variance_threshold - 1e-12)
        .map(|i| i + 1)
        .unwrap_or(full.k());
    full.truncate(k)
}

/// Basis with exactly `k` components.
pub fn compute_fpc_fixed(curves: &CurveSet, k: usize) -> Result<FpcBasis> {
    let cap = curves.n().min(curves.m());
    if k == 0 || k > cap {
        return Err(Error::RankDeficient {
            available: cap,
            requested: k,
        });
    }
    let full = spectrum(curves, k)?;
    if full.k() < k {
        return Err(Error::RankDeficient {
            available: full.k(),
            requested: k,
        });
    }
    Ok(full)
}

/// Scores `<curve_i, e_a>` under trapezoid quadrature, `n x k`.
pub fn project(curves: &CurveSet, basis: &FpcBasis) -> Result<DMatrix<f64>> {
    if !curves.grid().approx_eq(basis.grid()) {
        return Err(Error::GridMismatch);
    }
    let w = basis.grid().weights();
    let mut we = basis.functions().clone();
    for (r, mut row) in we.row_iter_mut().enumerate() {
        row *= w[r];
    }
    Ok(curves.values() * we)
}

/// Surface `sum_ab e_a(u) B_ab e_b(v)` on the grid tensor. Rows follow the
/// block's row (feature) index, columns its column (response) index.
pub fn reconstruct_surface(block: &DMatrix<f64>, basis: &FpcBasis) -> Result<DMatrix<f64>> {
    let k = basis.k();
    if block.nrows() != k || block.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "block is {}x{}, basis has {k} functions",
            block.nrows(),
            block.ncols()
        )));
    }
    let e = basis.functions();
    Ok(e * block * e.transpose())
}
