use std::time::Instant;

use super::criteria::relax_default;
use super::path::{run_path_scored, trace};
use super::{AdaptiveMode, EstimateKind, PathConfig, PathPoint, PathResult};
use crate::error::{Error, Result};
use crate::functional::ScoreDesign;
use crate::penalty::BlockMatrix;

const MIN_BLOCK_NORM: f64 = 1e-12;

/// Adaptive penalty weights for the `selected` blocks of a relaxed estimate.
///
/// Full: `1 / ||B_j||`. Soft: `sd / ||B_j||`, with `sd` the sample standard
/// deviation of the selected block norms.
pub fn adaptive_weights(
    b_relaxed: &BlockMatrix,
    selected: &[usize],
    mode: AdaptiveMode,
) -> Result<Vec<f64>> {
    let norms: Vec<f64> = selected.iter().map(|&j| b_relaxed.block_norm(j)).collect();
    if let Some(pos) = norms.iter().position(|&v| v < MIN_BLOCK_NORM) {
        return Err(Error::ZeroBlock(selected[pos]));
    }
    match mode {
        AdaptiveMode::None => Ok(vec![1.0; selected.len()]),
        AdaptiveMode::Full => Ok(norms.iter().map(|v| 1.0 / v).collect()),
        AdaptiveMode::Soft => {
            if norms.len() < 2 {
                return Err(Error::SoftDegenerate);
            }
            let n = norms.len() as f64;
            let mean = norms.iter().sum::<f64>() / n;
            let var = norms.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sd = var.sqrt();
            if sd < MIN_BLOCK_NORM {
                return Err(Error::SoftDegenerate);
            }
            Ok(norms.iter().map(|v| sd / v).collect())
        }
    }
}

fn lift(point: &mut PathPoint, candidates: &[usize], p: usize) {
    point.selected_blocks = point
        .selected_blocks
        .iter()
        .map(|&l| candidates[l])
        .collect();
    point.b_raw = point.b_raw.scatter(candidates, p);
    point.b_relaxed = point.b_relaxed.as_ref().map(|b| b.scatter(candidates, p));
}

/// Adaptive stage started from the best model of an unweighted path.
///
/// Full mode runs a new path on the initially selected blocks with weights
/// `1/||B^R_j||`, scored without relaxation. Soft mode re-solves once at the
/// initial best penalty with soft weights and relaxes the result.
pub fn run_adaptive(
    design: &ScoreDesign,
    config: &PathConfig,
    initial: &PathResult,
) -> Result<PathResult> {
    let start = Instant::now();
    let best = initial.best().ok_or(Error::EmptyInitialSelection)?;
    let selected = best.selected_blocks.clone();
    if selected.is_empty() {
        return Err(Error::EmptyInitialSelection);
    }
    let p = design.p();
    let sub = design.select_blocks(&selected);
    let relaxed = match &best.b_relaxed {
        Some(b) => b.clone(),
        None => relax_default(design, &selected)?,
    };

    match config.adaptive {
        AdaptiveMode::None => Err(Error::InvalidParameter(
            "adaptive stage requested with adaptive = none".into(),
        )),
        AdaptiveMode::Full => {
            let w = adaptive_weights(&relaxed, &selected, AdaptiveMode::Full)?;
            let mut res = run_path_scored(&sub, config, &w, EstimateKind::Raw)?;
            for pt in res.points.iter_mut() {
                lift(pt, &selected, p);
            }
            res.adaptive = AdaptiveMode::Full;
            res.candidates = selected;
            res.elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
            Ok(res)
        }
        AdaptiveMode::Soft => {
            let (w, soft_fallback) =
                match adaptive_weights(&relaxed, &selected, AdaptiveMode::Soft) {
                    Ok(w) => (w, false),
                    Err(Error::SoftDegenerate) => (
                        adaptive_weights(&relaxed, &selected, AdaptiveMode::Full)?,
                        true,
                    ),
                    Err(e) => return Err(e),
                };
            let lambdas = [(best.c_lambda, best.lambda1, best.lambda2)];
            let (mut points, _) = trace(&sub, &w, &lambdas, config, None, true)?;
            for pt in points.iter_mut() {
                lift(pt, &selected, p);
            }
            Ok(PathResult {
                lambda_max: initial.lambda_max,
                criterion: config.criterion,
                adaptive: AdaptiveMode::Soft,
                candidates: selected,
                weights_used: w,
                best_index: (!points.is_empty()).then_some(0),
                points,
                estimate_kind: EstimateKind::Relaxed,
                stopped_early: false,
                soft_fallback,
                elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            })
        }
    }
}

/// Unweighted path followed by the adaptive stage requested in `config`.
#[derive(Debug, Clone)]
pub struct SelectionOutcome {
    pub initial: PathResult,
    pub adaptive: Option<PathResult>,
    /// The unweighted path selected nothing, so no adaptive stage ran.
    pub null_model: bool,
}

impl SelectionOutcome {
    /// The path whose best point is the final model.
    pub fn final_path(&self) -> &PathResult {
        self.adaptive.as_ref().unwrap_or(&self.initial)
    }

    pub fn selected(&self) -> Vec<usize> {
        self.final_path().selected()
    }

    pub fn estimate(&self) -> Option<&BlockMatrix> {
        self.final_path().estimate()
    }
}

pub fn select_model(design: &ScoreDesign, config: &PathConfig) -> Result<SelectionOutcome> {
    let ones = vec![1.0; design.p()];
    let initial = run_path_scored(design, config, &ones, EstimateKind::Relaxed)?;
    if config.adaptive == AdaptiveMode::None {
        return Ok(SelectionOutcome {
            initial,
            adaptive: None,
            null_model: false,
        });
    }
    match run_adaptive(design, config, &initial) {
        Ok(a) => Ok(SelectionOutcome {
            initial,
            adaptive: Some(a),
            null_model: false,
        }),
        Err(Error::EmptyInitialSelection) => Ok(SelectionOutcome {
            initial,
            adaptive: None,
            null_model: true,
        }),
        Err(e) => Err(e),
    }
}
