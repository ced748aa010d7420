use nalgebra::{DMatrix, DMatrixView};
use rayon::prelude::*;

use super::{compute_fpc, project, CurveSet, FpcBasis};
use crate::error::{Error, Result};

/// Score-space regression problem `Y ~ X B`.
///
/// `x` holds `p` contiguous blocks of `k` columns; `y` has `q` columns
/// (`q = k` for functional responses, `q = 1` for scalar ones). Each
/// coefficient block is therefore `k x q`.
#[derive(Debug, Clone)]
pub struct ScoreDesign {
    y: DMatrix<f64>,
    x: DMatrix<f64>,
    k: usize,
    block_names: Vec<String>,
}

impl ScoreDesign {
    pub fn new(
        y: DMatrix<f64>,
        x: DMatrix<f64>,
        k: usize,
        block_names: Vec<String>,
    ) -> Result<Self> {
        if k == 0 || x.ncols() % k != 0 {
            return Err(Error::DimensionMismatch(format!(
                "{} design columns are not a multiple of k = {k}",
                x.ncols()
            )));
        }
        if x.nrows() != y.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "design has {} rows, response has {}",
                x.nrows(),
                y.nrows()
            )));
        }
        let p = x.ncols() / k;
        if block_names.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "{} block names for {p} blocks",
                block_names.len()
            )));
        }
        if y.ncols() == 0 || x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Format("design entries must be finite".into()));
        }
        Ok(ScoreDesign {
            y,
            x,
            k,
            block_names,
        })
    }

    /// Design with default block labels `x0`, `x1`, ...
    pub fn unnamed(y: DMatrix<f64>, x: DMatrix<f64>, k: usize) -> Result<Self> {
        let p = if k == 0 { 0 } else { x.ncols() / k };
        Self::new(y, x, k, default_names(p))
    }

    pub fn y(&self) -> &DMatrix<f64> {
        &self.y
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols() / self.k
    }

    /// Rows of each coefficient block.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Response columns (columns of each coefficient block).
    pub fn q(&self) -> usize {
        self.y.ncols()
    }

    pub fn block_names(&self) -> &[String] {
        &self.block_names
    }

    pub fn block(&self, j: usize) -> DMatrixView<'_, f64> {
        self.x.columns(j * self.k, self.k)
    }

    /// Design restricted to the listed blocks, in that order.
    pub fn select_blocks(&self, blocks: &[usize]) -> ScoreDesign {
        let cols: Vec<usize> = blocks
            .iter()
            .flat_map(|&j| (j * self.k)..((j + 1) * self.k))
            .collect();
        ScoreDesign {
            y: self.y.clone(),
            x: self.x.select_columns(&cols),
            k: self.k,
            block_names: blocks.iter().map(|&j| self.block_names[j].clone()).collect(),
        }
    }

    /// Design restricted to the listed observations.
    pub fn select_rows(&self, rows: &[usize]) -> ScoreDesign {
        ScoreDesign {
            y: self.y.select_rows(rows),
            x: self.x.select_rows(rows),
            k: self.k,
            block_names: self.block_names.clone(),
        }
    }
}

/// Labels `x0, x1, ...` used when features are unnamed.
pub fn default_names(p: usize) -> Vec<String> {
    (0..p).map(|j| format!("x{j}")).collect()
}

/// Projects the response and every feature on the response's leading FPCs.
///
/// Inputs must already be standardized and share one grid. Blocks follow the
/// order of `features`.
pub fn build_design(
    response: &CurveSet,
    features: &[CurveSet],
    block_names: Option<Vec<String>>,
    variance_threshold: f64,
    k_max: usize,
) -> Result<(ScoreDesign, FpcBasis)> {
    for f in features {
        response.ensure_same_grid(f)?;
        if f.n() != response.n() {
            return Err(Error::DimensionMismatch(format!(
                "feature has {} curves, response has {}",
                f.n(),
                response.n()
            )));
        }
    }
    let basis = compute_fpc(response, variance_threshold, k_max)?;
    let design = design_on_basis(response, features, block_names, &basis)?;
    Ok((design, basis))
}

/// Builds the score design for a given response basis.
pub fn design_on_basis(
    response: &CurveSet,
    features: &[CurveSet],
    block_names: Option<Vec<String>>,
    basis: &FpcBasis,
) -> Result<ScoreDesign> {
    let k = basis.k();
    let n = response.n();
    let y = project(response, basis)?;
    let blocks: Vec<DMatrix<f64>> = features
        .par_iter()
        .map(|f| project(f, basis))
        .collect::<Result<_>>()?;
    let mut x = DMatrix::zeros(n, k * features.len());
    for (j, b) in blocks.iter().enumerate() {
        x.columns_mut(j * k, k).copy_from(b);
    }
    let names = block_names.unwrap_or_else(|| default_names(features.len()));
    ScoreDesign::new(y, x, k, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functional::Grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_curves(n: usize, m: usize, seed: u64) -> CurveSet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = DMatrix::from_fn(n, m, |_, _| rng.random_range(-1.0..1.0));
        CurveSet::new(v, Grid::unit(m).unwrap()).unwrap()
    }

    #[test]
    fn feature_equal_to_response_reproduces_scores() {
        let y = random_curves(10, 20, 1);
        let (d, _) = build_design(&y, &[y.clone()], None, 0.9, 5).unwrap();
        assert_eq!(d.p(), 1);
        assert_eq!(d.x(), d.y());
    }

    #[test]
    fn orthogonal_feature_gives_zero_block() {
        let y = random_curves(10, 20, 2);
        let basis = compute_fpc(&y, 0.6, 4).unwrap();
        // Remove the span of the basis from a random set.
        let r = random_curves(10, 20, 3);
        let s = project(&r, &basis).unwrap();
        let resid = r.values() - basis.curves_from_scores(&s).unwrap();
        let f = CurveSet::new(resid, y.grid().clone()).unwrap();
        let d = design_on_basis(&y, &[f], None, &basis).unwrap();
        assert!(d.x().abs().max() < 1e-12);
    }

    #[test]
    fn blocks_equal_per_feature_projection() {
        let y = random_curves(12, 15, 4);
        let feats: Vec<CurveSet> = (0..3).map(|s| random_curves(12, 15, 10 + s)).collect();
        let (d, basis) = build_design(&y, &feats, None, 0.8, 6).unwrap();
        for (j, f) in feats.iter().enumerate() {
            let direct = project(f, &basis).unwrap();
            assert!((d.block(j) - direct).abs().max() < 1e-14);
        }
        assert_eq!(d.x().ncols(), 3 * d.k());
    }

    #[test]
    fn subsetting_keeps_block_order() {
        let y = random_curves(12, 15, 5);
        let feats: Vec<CurveSet> = (0..4).map(|s| random_curves(12, 15, 20 + s)).collect();
        let (d, _) = build_design(&y, &feats, None, 0.8, 6).unwrap();
        let sub = d.select_blocks(&[3, 1]);
        assert_eq!(sub.block_names(), &["x3".to_string(), "x1".to_string()]);
        assert_eq!(sub.block(0), d.block(3));
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let y = random_curves(6, 10, 1);
        let f = CurveSet::new(DMatrix::zeros(6, 10), Grid::uniform(10, 0.0, 0.9).unwrap()).unwrap();
        assert!(matches!(
            build_design(&y, &[f], None, 0.9, 3),
            Err(Error::GridMismatch)
        ));
    }
}
