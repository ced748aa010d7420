use nalgebra::{Cholesky, DMatrix};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::path::trace;
use super::{EstimateKind, GcvScale, PathConfig};
use crate::dal::{solve, x_times, DalConfig};
use crate::error::{Error, Result};
use crate::functional::ScoreDesign;
use crate::penalty::{BlockMatrix, PenaltyParams};

fn active_columns(design: &ScoreDesign, selected: &[usize]) -> DMatrix<f64> {
    let k = design.k();
    let cols: Vec<usize> = selected
        .iter()
        .flat_map(|&j| (j * k)..((j + 1) * k))
        .collect();
    design.x().select_columns(&cols)
}

/// Default relaxation ridge: `1e-10 tr(G) / dim(G)`.
pub fn ridge_epsilon(gram: &DMatrix<f64>) -> f64 {
    if gram.nrows() == 0 {
        return 0.0;
    }
    1e-10 * gram.trace() / gram.nrows() as f64
}

/// Least squares refit on the selected blocks:
/// `B_J = (X_J^T X_J + eps I)^{-1} X_J^T Y`, zero elsewhere.
pub fn relax(design: &ScoreDesign, selected: &[usize], ridge_eps: f64) -> Result<BlockMatrix> {
    if selected.is_empty() {
        return Err(Error::InvalidParameter("relaxation needs a nonempty selection".into()));
    }
    let xj = active_columns(design, selected);
    let mut gram = xj.tr_mul(&xj);
    for i in 0..gram.nrows() {
        gram[(i, i)] += ridge_eps;
    }
    let chol = Cholesky::new(gram).ok_or_else(|| {
        Error::FactorizationFailure(format!(
            "relaxation normal equations on {} blocks are singular",
            selected.len()
        ))
    })?;
    let coef = chol.solve(&xj.tr_mul(design.y()));
    let local = BlockMatrix::new(coef, design.k())?;
    Ok(local.scatter(selected, design.p()))
}

/// `relax` with the default ridge.
pub fn relax_default(design: &ScoreDesign, selected: &[usize]) -> Result<BlockMatrix> {
    let xj = active_columns(design, selected);
    let eps = ridge_epsilon(&xj.tr_mul(&xj));
    relax(design, selected, eps)
}

/// `nu = tr(X_J (X_J^T X_J + lambda2 W)^{-1} X_J^T)` with `W = diag(w_j) (x) I_k`.
pub fn degrees_of_freedom(
    design: &ScoreDesign,
    selected: &[usize],
    lambda2: f64,
    weights: &[f64],
) -> Result<f64> {
    if selected.is_empty() {
        return Ok(0.0);
    }
    let k = design.k();
    let xj = active_columns(design, selected);
    let gram = xj.tr_mul(&xj);
    let mut a = gram.clone();
    for (l, &j) in selected.iter().enumerate() {
        for i in 0..k {
            a[(l * k + i, l * k + i)] += lambda2 * weights[j];
        }
    }
    let chol = Cholesky::new(a).ok_or_else(|| {
        Error::FactorizationFailure("degrees-of-freedom system is singular".into())
    })?;
    Ok(chol.solve(&gram).trace())
}

/// `gcv = rss / (n - c nu)^2`; returns `(score, nu)`.
pub fn gcv_score(
    design: &ScoreDesign,
    selected: &[usize],
    b: &BlockMatrix,
    lambda2: f64,
    weights: &[f64],
    scale: GcvScale,
) -> Result<(f64, f64)> {
    let nu = degrees_of_freedom(design, selected, lambda2, weights)?;
    let c = match scale {
        GcvScale::ResponseColumns => design.q(),
        GcvScale::BlockRows => design.k(),
    } as f64;
    let denom = design.n() as f64 - c * nu;
    if denom <= 0.0 {
        return Err(Error::DegenerateDof(denom));
    }
    let rss = (design.y() - x_times(design, b)).norm_squared();
    Ok((rss / (denom * denom), nu))
}

/// Fold label of every observation, a deterministic function of `seed`.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

pub(crate) fn split(fold: &[usize], f: usize) -> (Vec<usize>, Vec<usize>) {
    let (test, train): (Vec<usize>, Vec<usize>) = (0..fold.len()).partition(|&i| fold[i] == f);
    (train, test)
}

/// Mean over rows of `||Y_i - X_i B|| / ||Y_i||`.
pub(crate) fn relative_prediction_error(design: &ScoreDesign, b: &BlockMatrix) -> f64 {
    let resid = design.y() - x_times(design, b);
    let n = design.n();
    let total: f64 = (0..n)
        .map(|i| {
            let den = design.y().row(i).norm().max(1e-300);
            resid.row(i).norm() / den
        })
        .sum();
    total / n as f64
}

fn check_folds(n: usize, folds: usize) -> Result<()> {
    if folds < 2 || n < 2 * folds {
        return Err(Error::InvalidParameter(format!(
            "cv with {folds} folds needs at least {} observations, got {n}",
            2 * folds.max(2)
        )));
    }
    Ok(())
}

/// Held-out error at one `(lambda1, lambda2)` pair, averaged over folds.
#[allow(clippy::too_many_arguments)]
pub fn cv_score(
    design: &ScoreDesign,
    weights: &[f64],
    lambda1: f64,
    lambda2: f64,
    folds: usize,
    seed: u64,
    solver: &DalConfig,
    scoring: EstimateKind,
) -> Result<f64> {
    check_folds(design.n(), folds)?;
    let labels = fold_assignment(design.n(), folds, seed);
    let params = PenaltyParams::new(lambda1, lambda2, weights.to_vec())?;
    let errs: Vec<f64> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (train, test) = split(&labels, f);
            let dtrain = design.select_rows(&train);
            let b = match solve(&dtrain, &params, solver, None) {
                Ok(s) => s.state.b,
                Err(Error::MaxIterations { best, .. }) => best.state.b,
                Err(e) => return Err(e),
            };
            let sel = b.nonzero_blocks();
            let b = match scoring {
                EstimateKind::Relaxed if !sel.is_empty() => relax_default(&dtrain, &sel)?,
                _ => b,
            };
            Ok(relative_prediction_error(&design.select_rows(&test), &b))
        })
        .collect::<Result<_>>()?;
    Ok(errs.iter().sum::<f64>() / folds as f64)
}

/// Per-point mean and standard error of held-out errors across folds.
#[derive(Debug, Clone, PartialEq)]
pub struct CvErrors {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
}

/// Cross-validated errors along a fixed sequence of `(c, lambda1, lambda2)`.
pub fn cv_errors(
    design: &ScoreDesign,
    weights: &[f64],
    lambdas: &[(f64, f64, f64)],
    config: &PathConfig,
    scoring: EstimateKind,
) -> Result<CvErrors> {
    let folds = config.cv_folds;
    check_folds(design.n(), folds)?;
    let labels = fold_assignment(design.n(), folds, config.seed);
    let per_fold: Vec<Vec<f64>> = (0..folds)
        .into_par_iter()
        .map(|f| {
            let (train, test) = split(&labels, f);
            let dtrain = design.select_rows(&train);
            let dtest = design.select_rows(&test);
            let relax = scoring == EstimateKind::Relaxed;
            let (points, _) = trace(&dtrain, weights, lambdas, config, None, relax)?;
            Ok(points
                .iter()
                .map(|pt| {
                    if pt.error.is_some() && !pt.primal_obj.is_finite() {
                        return f64::NAN;
                    }
                    let b = match scoring {
                        EstimateKind::Raw => &pt.b_raw,
                        EstimateKind::Relaxed => pt.b_relaxed.as_ref().unwrap_or(&pt.b_raw),
                    };
                    relative_prediction_error(&dtest, b)
                })
                .collect())
        })
        .collect::<Result<_>>()?;

    let mut mean = Vec::with_capacity(lambdas.len());
    let mut se = Vec::with_capacity(lambdas.len());
    for i in 0..lambdas.len() {
        let vals: Vec<f64> = per_fold.iter().filter_map(|f| f.get(i).copied()).collect();
        if vals.len() < folds || vals.iter().any(|v| !v.is_finite()) {
            mean.push(f64::NAN);
            se.push(f64::NAN);
            continue;
        }
        let m = vals.iter().sum::<f64>() / folds as f64;
        let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (folds - 1) as f64;
        mean.push(m);
        se.push((var / folds as f64).sqrt());
    }
    Ok(CvErrors { mean, se })
}
