use std::time::Instant;

use nalgebra::DMatrix;

use super::criteria::{cv_errors, gcv_score, relax_default};
use super::{Criterion, EstimateKind, PathConfig, PathPoint, PathResult};
use crate::dal::{solve, x_times, DalConfig, DalSolution, DalState};
use crate::error::{Error, Result};
use crate::functional::ScoreDesign;
use crate::penalty::{frobenius, BlockMatrix, PenaltyParams};

/// `max_j ||(X^T Y)_j|| / w_j`: the smallest `lambda1` with an empty solution.
pub fn lambda_max(design: &ScoreDesign, weights: &[f64]) -> f64 {
    let xty = design.x().tr_mul(design.y());
    let k = design.k();
    (0..design.p())
        .map(|j| frobenius(xty.rows(j * k, k)) / weights[j])
        .fold(0.0, f64::max)
}

/// Geometric grid of reduction factors from 1 down to `c_min`.
pub fn lambda_grid(n_lambda: usize, c_min: f64) -> Vec<f64> {
    if n_lambda == 1 {
        return vec![1.0];
    }
    let last = (n_lambda - 1) as f64;
    (0..n_lambda)
        .map(|i| c_min.powf(i as f64 / last))
        .collect()
}

/// Warm-start carrier in full block indexing.
struct Warm {
    v: DMatrix<f64>,
    z: BlockMatrix,
    b: BlockMatrix,
    sigma: Option<f64>,
    active: Vec<usize>,
    lambda1: f64,
}

impl Warm {
    fn cold(design: &ScoreDesign, lambda1: f64) -> Self {
        let (p, k, q) = (design.p(), design.k(), design.q());
        Warm {
            v: DMatrix::zeros(design.n(), q),
            z: BlockMatrix::zeros(p, k, q),
            b: BlockMatrix::zeros(p, k, q),
            sigma: None,
            active: Vec::new(),
            lambda1,
        }
    }
}

struct PointSolve {
    b: BlockMatrix,
    working_set: usize,
    outer_iters: usize,
    newton_steps: usize,
    safeguard_steps: usize,
    converged: bool,
    primal_obj: f64,
    dual_obj: f64,
    error: Option<String>,
}

fn block_score_norms(g: &DMatrix<f64>, k: usize, weights: &[f64]) -> Vec<f64> {
    (0..weights.len())
        .map(|j| frobenius(g.rows(j * k, k)) / weights[j])
        .collect()
}

fn run_solver(
    design: &ScoreDesign,
    params: &PenaltyParams,
    cfg: &DalConfig,
    warm: Option<&DalState>,
) -> Result<(DalSolution, Option<String>)> {
    match solve(design, params, cfg, warm) {
        Ok(sol) => Ok((sol, None)),
        Err(Error::MaxIterations { iterations, res3, best }) => Ok((
            *best,
            Some(format!(
                "solver stopped after {iterations} outer iterations (res3 = {res3:e})"
            )),
        )),
        Err(e) => Err(e),
    }
}

/// Solves one point, optionally on a strong-rule working set enlarged until
/// every excluded block satisfies its optimality condition.
fn solve_point(
    design: &ScoreDesign,
    weights: &[f64],
    lambda1: f64,
    lambda2: f64,
    cfg: &PathConfig,
    warm: &mut Warm,
    first: bool,
) -> Result<PointSolve> {
    let p = design.p();
    let k = design.k();
    let params = PenaltyParams::new(lambda1, lambda2, weights.to_vec())?;

    let residual = design.y() - x_times(design, &warm.b);
    let grad = design.x().tr_mul(&residual);
    let scores = block_score_norms(&grad, k, weights);

    if warm.active.is_empty() && scores.iter().all(|&s| s <= lambda1) {
        // B = 0 satisfies the optimality conditions exactly; V = -Y.
        warm.v = -design.y();
        warm.z = BlockMatrix::new(grad, k)?;
        warm.b = BlockMatrix::zeros(p, k, design.q());
        warm.lambda1 = lambda1;
        let primal = 0.5 * design.y().norm_squared();
        return Ok(PointSolve {
            b: warm.b.clone(),
            working_set: 0,
            outer_iters: 0,
            newton_steps: 0,
            safeguard_steps: 0,
            converged: true,
            primal_obj: primal,
            dual_obj: -primal,
            error: None,
        });
    }

    if !cfg.screening {
        let state = (!first).then(|| DalState {
            v: warm.v.clone(),
            z: warm.z.clone(),
            b: warm.b.clone(),
            sigma: warm.sigma.unwrap_or(0.0),
            active: warm.active.clone(),
        });
        let (sol, error) = run_solver(design, &params, &cfg.solver, state.as_ref())?;
        let d = &sol.diagnostics;
        let out = PointSolve {
            b: sol.state.b.clone(),
            working_set: p,
            outer_iters: d.outer_iterations(),
            newton_steps: d.newton_steps,
            safeguard_steps: d.safeguard_steps,
            converged: d.converged,
            primal_obj: d.primal_obj,
            dual_obj: d.dual_obj,
            error,
        };
        warm.v = sol.state.v;
        warm.z = sol.state.z;
        warm.b = sol.state.b;
        warm.sigma = Some(sol.state.sigma);
        warm.active = sol.state.active;
        warm.lambda1 = lambda1;
        return Ok(out);
    }

    let cut = 2.0 * lambda1 - warm.lambda1;
    let mut in_set = vec![false; p];
    for &j in &warm.active {
        in_set[j] = true;
    }
    for (j, &s) in scores.iter().enumerate() {
        if s >= cut {
            in_set[j] = true;
        }
    }

    let mut totals = (0usize, 0usize, 0usize);
    let mut error = None;
    loop {
        let set: Vec<usize> = (0..p).filter(|&j| in_set[j]).collect();
        let (b_full, v, z_set, sigma, converged, primal, dual) = if set.is_empty() {
            // Empty model: V = XB - Y with B = 0 is dual optimal.
            let b0 = BlockMatrix::zeros(p, k, design.q());
            let v = -design.y();
            let primal = 0.5 * design.y().norm_squared();
            let dual = -primal;
            (b0, v, None, warm.sigma, true, primal, dual)
        } else {
            let sub = design.select_blocks(&set);
            let sub_w: Vec<f64> = set.iter().map(|&j| weights[j]).collect();
            let sub_params = PenaltyParams::new(lambda1, lambda2, sub_w)?;
            let state = warm.sigma.filter(|_| !first).map(|sigma| DalState {
                v: warm.v.clone(),
                z: warm.z.gather(&set),
                b: warm.b.gather(&set),
                sigma,
                active: Vec::new(),
            });
            let (sol, err) = run_solver(&sub, &sub_params, &cfg.solver, state.as_ref())?;
            if err.is_some() {
                error = err;
            }
            let d = &sol.diagnostics;
            totals.0 += d.outer_iterations();
            totals.1 += d.newton_steps;
            totals.2 += d.safeguard_steps;
            let b_full = sol.state.b.scatter(&set, p);
            (
                b_full,
                sol.state.v,
                Some((set.clone(), sol.state.z)),
                Some(sol.state.sigma),
                d.converged,
                d.primal_obj,
                d.dual_obj,
            )
        };

        let residual = design.y() - x_times(design, &b_full);
        let grad = design.x().tr_mul(&residual);
        let scores = block_score_norms(&grad, k, weights);
        let mut violated = false;
        for j in 0..p {
            if !in_set[j] && scores[j] > lambda1 {
                in_set[j] = true;
                violated = true;
            }
        }

        // Excluded blocks take the feasible dual value Z_j = -X_j^T V = X_j^T R.
        let mut z_full = BlockMatrix::new(grad, k)?;
        if let Some((set, z)) = z_set {
            for (local, &j) in set.iter().enumerate() {
                z_full.block_mut(j).copy_from(&z.block(local));
            }
        }
        warm.v = v;
        warm.z = z_full;
        warm.active = b_full.nonzero_blocks();
        warm.b = b_full;
        warm.sigma = sigma.or(warm.sigma);

        if !violated {
            warm.lambda1 = lambda1;
            return Ok(PointSolve {
                b: warm.b.clone(),
                working_set: set.len(),
                outer_iters: totals.0,
                newton_steps: totals.1,
                safeguard_steps: totals.2,
                converged,
                primal_obj: primal,
                dual_obj: dual,
                error,
            });
        }
    }
}

/// Solves the path over `lambdas` (pairs of `(c, lambda1, lambda2)`) with
/// warm starts. Scores are left empty.
pub(crate) fn trace(
    design: &ScoreDesign,
    weights: &[f64],
    lambdas: &[(f64, f64, f64)],
    cfg: &PathConfig,
    max_selected: Option<usize>,
    relax: bool,
) -> Result<(Vec<PathPoint>, bool)> {
    let first_l1 = lambdas.first().map(|l| l.1).unwrap_or(0.0);
    let mut warm = Warm::cold(design, first_l1);
    let mut points = Vec::with_capacity(lambdas.len());
    for (i, &(c, l1, l2)) in lambdas.iter().enumerate() {
        let start = Instant::now();
        let solved = match solve_point(design, weights, l1, l2, cfg, &mut warm, i == 0) {
            Ok(s) => s,
            Err(e @ Error::FactorizationFailure(_)) => PointSolve {
                b: warm.b.clone(),
                working_set: 0,
                outer_iters: 0,
                newton_steps: 0,
                safeguard_steps: 0,
                converged: false,
                primal_obj: f64::NAN,
                dual_obj: f64::NAN,
                error: Some(e.to_string()),
            },
            Err(e) => return Err(e),
        };
        let selected = solved.b.nonzero_blocks();
        if let Some(cap) = max_selected {
            if selected.len() > cap {
                return Ok((points, true));
            }
        }
        let b_relaxed = if selected.is_empty() {
            Some(solved.b.clone())
        } else if relax {
            Some(relax_default(design, &selected)?)
        } else {
            None
        };
        points.push(PathPoint {
            c_lambda: c,
            lambda1: l1,
            lambda2: l2,
            selected_blocks: selected,
            criterion_score: None,
            criterion_se: None,
            dof: None,
            outer_iters: solved.outer_iters,
            newton_steps: solved.newton_steps,
            safeguard_steps: solved.safeguard_steps,
            working_set: solved.working_set,
            converged: solved.converged,
            primal_obj: solved.primal_obj,
            dual_obj: solved.dual_obj,
            error: solved.error,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
            b_raw: solved.b,
            b_relaxed,
        });
    }
    Ok((points, false))
}

fn pick_best(points: &[PathPoint], criterion: Criterion) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, pt) in points.iter().enumerate() {
        if let Some(s) = pt.criterion_score {
            if best.is_none_or(|(_, b)| s < b) {
                best = Some((i, s));
            }
        }
    }
    let (imin, smin) = best?;
    if criterion == Criterion::Gcv {
        return Some(imin);
    }
    // One-standard-error rule toward sparser models.
    let bound = smin + points[imin].criterion_se.unwrap_or(0.0);
    points
        .iter()
        .position(|pt| pt.criterion_score.is_some_and(|s| s <= bound))
}

/// Path over the standard grid with unit weights' semantics generalized to
/// `weights`, scored on relaxed coefficients.
pub fn run_path(design: &ScoreDesign, config: &PathConfig, weights: &[f64]) -> Result<PathResult> {
    run_path_scored(design, config, weights, EstimateKind::Relaxed)
}

/// Path scored on `scoring` coefficients (relaxed or raw).
pub fn run_path_scored(
    design: &ScoreDesign,
    config: &PathConfig,
    weights: &[f64],
    scoring: EstimateKind,
) -> Result<PathResult> {
    config.validate()?;
    if weights.len() != design.p() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} blocks",
            weights.len(),
            design.p()
        )));
    }
    if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
        return Err(Error::InvalidParameter("weights must be positive and finite".into()));
    }
    let start = Instant::now();
    let lmax = lambda_max(design, weights);
    let lambdas: Vec<(f64, f64, f64)> = lambda_grid(config.n_lambda, config.c_min)
        .into_iter()
        .map(|c| {
            let (l1, l2) = config.lambdas(c, lmax);
            (c, l1, l2.max(f64::MIN_POSITIVE))
        })
        .collect();
    let saturation = config
        .saturation_stop
        .then(|| design.n() / design.k().max(1));
    let cap = match (config.max_selected, saturation) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    };
    let relax_all = scoring == EstimateKind::Relaxed && config.criterion == Criterion::Gcv;
    let (mut points, stopped_early) = if lmax == 0.0 {
        // X^T Y = 0: every point is the empty model; only the first is kept.
        trace(design, weights, &lambdas[..1], config, cap, relax_all)?
    } else {
        trace(design, weights, &lambdas, config, cap, relax_all)?
    };

    let pick = |pt: &PathPoint| match scoring {
        EstimateKind::Raw => pt.b_raw.clone(),
        EstimateKind::Relaxed => pt.b_relaxed.clone().unwrap_or_else(|| pt.b_raw.clone()),
    };
    match config.criterion {
        Criterion::Gcv => {
            for pt in points.iter_mut() {
                if pt.error.is_some() && !pt.primal_obj.is_finite() {
                    continue;
                }
                match gcv_score(
                    design,
                    &pt.selected_blocks,
                    &pick(pt),
                    pt.lambda2,
                    weights,
                    config.gcv_scale,
                ) {
                    Ok((score, nu)) => {
                        pt.criterion_score = Some(score);
                        pt.dof = Some(nu);
                    }
                    Err(Error::DegenerateDof(_)) => {
                        pt.criterion_score = None;
                    }
                    Err(e) => return Err(e),
                }
            }
        }
        Criterion::Cv => {
            let used: Vec<(f64, f64, f64)> = points
                .iter()
                .map(|p| (p.c_lambda, p.lambda1, p.lambda2))
                .collect();
            let cv = cv_errors(design, weights, &used, config, scoring)?;
            for (pt, (m, se)) in points.iter_mut().zip(cv.mean.iter().zip(&cv.se)) {
                pt.criterion_score = m.is_finite().then_some(*m);
                pt.criterion_se = se.is_finite().then_some(*se);
            }
        }
    }
    let best_index = pick_best(&points, config.criterion);
    if let Some(pt) = best_index.map(|i| &mut points[i]) {
        if pt.b_relaxed.is_none() {
            pt.b_relaxed = Some(relax_default(design, &pt.selected_blocks)?);
        }
    }
    Ok(PathResult {
        lambda_max: lmax,
        criterion: config.criterion,
        adaptive: super::AdaptiveMode::None,
        candidates: (0..design.p()).collect(),
        weights_used: weights.to_vec(),
        points,
        best_index,
        estimate_kind: scoring,
        stopped_early,
        soft_fallback: false,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}
