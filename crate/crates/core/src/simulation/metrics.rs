use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::scenario::{GroundTruth, Sample};
use crate::error::{Error, Result};
use crate::functional::Grid;
use crate::model::FunctionalModel;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub false_pos: usize,
    pub false_neg: usize,
    /// Mean relative surface error over true positives; `None` when there is none.
    pub mse_b: Option<f64>,
    pub mse_b_defined: bool,
    pub mse_out: f64,
}

/// Selection, estimation and prediction metrics from raw arrays.
///
/// `estimated` pairs each selected index with its surface. `predictions`
/// and `observed` are `n_test x m`.
pub fn metrics_from_parts(
    grid: &Grid,
    estimated: &[(usize, &DMatrix<f64>)],
    truth: &GroundTruth,
    predictions: &DMatrix<f64>,
    observed: &DMatrix<f64>,
) -> Result<Metrics> {
    if predictions.shape() != observed.shape() {
        return Err(Error::DimensionMismatch(
            "predictions and observations differ in shape".into(),
        ));
    }
    let false_pos = estimated
        .iter()
        .filter(|(j, _)| !truth.active.contains(j))
        .count();
    let false_neg = truth
        .active
        .iter()
        .filter(|j| !estimated.iter().any(|(e, _)| e == *j))
        .count();

    let mut errs = Vec::new();
    for &(j, est) in estimated {
        if let Some(true_s) = truth.surface(j) {
            errs.push(grid.surface_norm(&(true_s - est)) / grid.surface_norm(true_s));
        }
    }
    let mse_b = (!errs.is_empty()).then(|| errs.iter().sum::<f64>() / errs.len() as f64);

    let n = observed.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let y: Vec<f64> = observed.row(i).iter().copied().collect();
        let r: Vec<f64> = (observed.row(i) - predictions.row(i)).iter().copied().collect();
        total += grid.norm(&r) / grid.norm(&y).max(f64::MIN_POSITIVE);
    }
    let mse_out = if n == 0 { 0.0 } else { total / n as f64 };
    Ok(Metrics {
        false_pos,
        false_neg,
        mse_b_defined: mse_b.is_some(),
        mse_b,
        mse_out,
    })
}

/// Metrics of a fitted model against the truth and an independent test sample.
pub fn evaluate(model: &FunctionalModel, truth: &GroundTruth, test: &Sample) -> Result<Metrics> {
    let predictions = model.predict(&test.features)?;
    let estimated: Vec<(usize, &DMatrix<f64>)> = model
        .selected()
        .iter()
        .copied()
        .zip(model.surfaces())
        .collect();
    metrics_from_parts(
        model.grid(),
        &estimated,
        truth,
        &predictions,
        test.response.values(),
    )
}
