//! Regularization path, model scoring and adaptive reweighting.

mod adaptive;
mod criteria;
mod path;

use serde::{Deserialize, Serialize};

use crate::dal::DalConfig;
use crate::error::{Error, Result};
use crate::penalty::BlockMatrix;

pub use adaptive::{adaptive_weights, run_adaptive, select_model, SelectionOutcome};
pub(crate) use criteria::split;
pub use criteria::{
    cv_errors, cv_score, degrees_of_freedom, fold_assignment, gcv_score, relax, relax_default,
    ridge_epsilon, CvErrors,
};
pub use path::{lambda_grid, lambda_max, run_path, run_path_scored};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    #[default]
    Gcv,
    Cv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AdaptiveMode {
    #[default]
    None,
    Full,
    Soft,
}

/// Multiplier of `nu` in the gcv denominator `(n - c nu)^2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GcvScale {
    /// One per response column (`k` for curves, `1` for scalars).
    #[default]
    ResponseColumns,
    /// One per basis function of the blocks.
    BlockRows,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathConfig {
    pub n_lambda: usize,
    pub c_min: f64,
    pub alpha: f64,
    pub max_selected: Option<usize>,
    pub criterion: Criterion,
    pub cv_folds: usize,
    pub adaptive: AdaptiveMode,
    pub seed: u64,
    /// Solve each point on a strong-rule working set, verified by a KKT check.
    pub screening: bool,
    /// Stop before the first point whose selected blocks have more score
    /// rows (`r k`) than observations.
    pub saturation_stop: bool,
    pub gcv_scale: GcvScale,
    pub solver: DalConfig,
}

impl Default for PathConfig {
    fn default() -> Self {
        PathConfig {
            n_lambda: 50,
            c_min: 0.01,
            alpha: 0.2,
            max_selected: None,
            criterion: Criterion::Gcv,
            cv_folds: 5,
            adaptive: AdaptiveMode::None,
            seed: 0,
            screening: true,
            saturation_stop: true,
            gcv_scale: GcvScale::ResponseColumns,
            solver: DalConfig::default(),
        }
    }
}

impl PathConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n_lambda == 0 {
            return bad("n_lambda must be positive".into());
        }
        if !(self.c_min > 0.0 && self.c_min < 1.0) {
            return bad(format!("c_min = {} must lie in (0, 1)", self.c_min));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha = {} must lie in (0, 1)", self.alpha));
        }
        if self.criterion == Criterion::Cv && self.cv_folds < 2 {
            return bad("cv needs at least 2 folds".into());
        }
        self.solver.validate()
    }

    /// `(lambda1, lambda2)` for a reduction factor `c`.
    ///
    /// `lambda1 = c lambda_max` so that the first point is the empty model,
    /// and `lambda2 / lambda1 = (1 - alpha) / alpha`.
    pub fn lambdas(&self, c: f64, lambda_max: f64) -> (f64, f64) {
        let l1 = c * lambda_max;
        (l1, l1 * (1.0 - self.alpha) / self.alpha)
    }
}

/// One solved point of a path.
#[derive(Debug, Clone, Serialize)]
pub struct PathPoint {
    pub c_lambda: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub selected_blocks: Vec<usize>,
    /// `None` when the score is undefined (degenerate dof or solver failure).
    pub criterion_score: Option<f64>,
    /// Standard error of the cv score across folds.
    pub criterion_se: Option<f64>,
    pub dof: Option<f64>,
    pub outer_iters: usize,
    pub newton_steps: usize,
    pub safeguard_steps: usize,
    pub working_set: usize,
    pub converged: bool,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub error: Option<String>,
    pub elapsed_ms: f64,
    #[serde(skip)]
    pub b_raw: BlockMatrix,
    /// Present for the best point and whenever scoring needed it.
    #[serde(skip)]
    pub b_relaxed: Option<BlockMatrix>,
}

/// Which coefficients of the best point are reported as the estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimateKind {
    Raw,
    Relaxed,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathResult {
    pub lambda_max: f64,
    pub criterion: Criterion,
    pub adaptive: AdaptiveMode,
    /// Blocks the path was allowed to use, in original indexing.
    pub candidates: Vec<usize>,
    /// Penalty weights aligned with `candidates`.
    pub weights_used: Vec<f64>,
    pub points: Vec<PathPoint>,
    pub best_index: Option<usize>,
    pub estimate_kind: EstimateKind,
    pub stopped_early: bool,
    /// Soft weights were undefined and full weights were used instead.
    pub soft_fallback: bool,
    pub elapsed_ms: f64,
}

impl PathResult {
    pub fn best(&self) -> Option<&PathPoint> {
        self.best_index.map(|i| &self.points[i])
    }

    pub fn selected(&self) -> Vec<usize> {
        self.best().map(|p| p.selected_blocks.clone()).unwrap_or_default()
    }

    /// Coefficients of the best point, raw or relaxed per `estimate_kind`.
    pub fn estimate(&self) -> Option<&BlockMatrix> {
        self.best().and_then(|p| match self.estimate_kind {
            EstimateKind::Raw => Some(&p.b_raw),
            EstimateKind::Relaxed => p.b_relaxed.as_ref(),
        })
    }

    pub fn total_outer_iterations(&self) -> usize {
        self.points.iter().map(|p| p.outer_iters).sum()
    }
}
