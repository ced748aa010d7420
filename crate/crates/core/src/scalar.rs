//! Scalar-on-function regression.
//!
//! Each feature is projected on its own leading FPCs; the response is a
//! single column, so coefficient blocks are `k x 1` and the Newton system
//! is `n x n` regardless of `k`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::dal::{solve, DalConfig, DalSolution};
use crate::error::{Error, Result};
use crate::functional::{
    compute_fpc, compute_fpc_fixed, default_names, project, CurveSet, FpcBasis, ScoreDesign,
};
use crate::penalty::{BlockMatrix, PenaltyParams};

/// Coefficient vector stored as `p` blocks of `k x 1`.
pub type ScalarBlockVector = BlockMatrix;

#[derive(Debug, Clone)]
pub struct ScalarDesign {
    scores: ScoreDesign,
    bases: Vec<FpcBasis>,
}

impl ScalarDesign {
    pub fn new(scores: ScoreDesign, bases: Vec<FpcBasis>) -> Result<Self> {
        if scores.q() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "scalar response must have one column, got {}",
                scores.q()
            )));
        }
        if bases.len() != scores.p() || bases.iter().any(|b| b.k() != scores.k()) {
            return Err(Error::DimensionMismatch(
                "one basis of size k is required per feature".into(),
            ));
        }
        Ok(ScalarDesign { scores, bases })
    }

    pub fn y(&self) -> DVector<f64> {
        self.scores.y().column(0).into_owned()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        self.scores.x()
    }

    pub fn k(&self) -> usize {
        self.scores.k()
    }

    pub fn n(&self) -> usize {
        self.scores.n()
    }

    pub fn p(&self) -> usize {
        self.scores.p()
    }

    pub fn bases(&self) -> &[FpcBasis] {
        &self.bases
    }

    /// The shared score-space view (`q = 1`) used by the solver and the path.
    pub fn scores(&self) -> &ScoreDesign {
        &self.scores
    }
}

/// Projects each feature on its own FPC basis.
///
/// All features share one `k`: `k_fixed` if given, otherwise the largest
/// per-feature size reaching `variance_threshold`, capped at `k_max`.
pub fn build_scalar_design(
    responses: &[f64],
    features: &[CurveSet],
    names: Option<Vec<String>>,
    variance_threshold: f64,
    k_fixed: Option<usize>,
    k_max: usize,
) -> Result<ScalarDesign> {
    let n = responses.len();
    if features.is_empty() {
        return Err(Error::DimensionMismatch("no features supplied".into()));
    }
    if let Some(f) = features.iter().find(|f| f.n() != n) {
        return Err(Error::DimensionMismatch(format!(
            "feature has {} curves, response has {n} values",
            f.n()
        )));
    }
    let k = match k_fixed {
        Some(k) => k,
        None => features
            .par_iter()
            .map(|f| compute_fpc(f, variance_threshold, k_max.min(f.n().min(f.m()))).map(|b| b.k()))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .unwrap_or(1),
    };
    let bases: Vec<FpcBasis> = features
        .par_iter()
        .map(|f| compute_fpc_fixed(f, k))
        .collect::<Result<_>>()?;
    let blocks: Vec<DMatrix<f64>> = features
        .par_iter()
        .zip(bases.par_iter())
        .map(|(f, b)| project(f, b))
        .collect::<Result<_>>()?;
    let mut x = DMatrix::zeros(n, k * features.len());
    for (j, b) in blocks.iter().enumerate() {
        x.columns_mut(j * k, k).copy_from(b);
    }
    let y = DMatrix::from_column_slice(n, 1, responses);
    let names = names.unwrap_or_else(|| default_names(features.len()));
    ScalarDesign::new(ScoreDesign::new(y, x, k, names)?, bases)
}

/// Solves the scalar block elastic-net with the shared DAL solver.
pub fn scalar_solve(
    design: &ScalarDesign,
    params: &PenaltyParams,
    config: &DalConfig,
) -> Result<DalSolution> {
    solve(design.scores(), params, config, None)
}

/// Coefficient curve `e^j(t) B_j` on the feature's grid.
pub fn reconstruct_coefficient_curve(block: &[f64], basis: &FpcBasis) -> Result<Vec<f64>> {
    if block.len() != basis.k() {
        return Err(Error::DimensionMismatch(format!(
            "block has {} entries, basis has {} functions",
            block.len(),
            basis.k()
        )));
    }
    let v = basis.functions() * DVector::from_column_slice(block);
    Ok(v.iter().copied().collect())
}
