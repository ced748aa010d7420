//! End-to-end fitting: standardize, project on FPCs, select, and map the
//! estimate back to the original scale.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dal::{solve, DalDiagnostics};
use crate::error::{Error, Result};
use crate::functional::{
    build_design, compute_fpc_fixed, design_on_basis, project, reconstruct_surface, standardize,
    CurveSet, FpcBasis, Grid, ScoreDesign, StandardizationRecord, DEFAULT_K_MAX,
};
use crate::model::{FunctionalModel, ScalarModel};
use crate::penalty::{BlockMatrix, PenaltyParams};
use crate::scalar::{build_scalar_design, reconstruct_coefficient_curve};
use crate::selection::{
    fold_assignment, lambda_max, relax_default, select_model, split, AdaptiveMode, PathConfig,
    SelectionOutcome,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    /// Cumulative explained variance used to pick `k`.
    pub variance_threshold: f64,
    pub k_max: usize,
    /// Fixed basis size; overrides `variance_threshold`.
    pub k: Option<usize>,
    /// Largest `k` tried when soft-adaptive estimation re-chooses the basis
    /// size. Defaults to `k_max`.
    pub soft_k_max: Option<usize>,
    pub path: PathConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            variance_threshold: 0.9,
            k_max: DEFAULT_K_MAX,
            k: None,
            soft_k_max: None,
            path: PathConfig::default(),
        }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "variance threshold must lie in (0, 1], got {}",
                self.variance_threshold
            )));
        }
        if self.k_max == 0 || self.k == Some(0) || self.soft_k_max == Some(0) {
            return Err(Error::InvalidParameter("basis sizes must be positive".into()));
        }
        self.path.validate()
    }
}

/// Penalty for a single fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaChoice {
    /// `c` relative to `lambda_max`, with `alpha` from the path options.
    Relative(f64),
    Absolute { lambda1: f64, lambda2: f64 },
}

/// Result of a single penalized solve.
#[derive(Debug, Clone)]
pub struct SingleFit {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda_max: f64,
    pub selected: Vec<usize>,
    pub coefficients: BlockMatrix,
    pub diagnostics: DalDiagnostics,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct FunctionalFit {
    pub model: FunctionalModel,
    pub selection: Option<SelectionOutcome>,
    pub single: Option<SingleFit>,
    pub block_names: Vec<String>,
    /// Response basis used for selection.
    pub basis: FpcBasis,
    /// Response basis behind the reported surfaces.
    pub estimation_basis: FpcBasis,
    /// `(k, cv error)` for every size tried by the soft-adaptive re-choice.
    pub k_errors: Vec<(usize, f64)>,
    pub response_record: StandardizationRecord,
    pub feature_records: Vec<StandardizationRecord>,
    pub elapsed_ms: f64,
}

impl FunctionalFit {
    pub fn selected(&self) -> &[usize] {
        self.model.selected()
    }
}

struct Prepared {
    response: CurveSet,
    features: Vec<CurveSet>,
    response_record: StandardizationRecord,
    feature_records: Vec<StandardizationRecord>,
    design: ScoreDesign,
    basis: FpcBasis,
}

fn check_inputs(response: &CurveSet, features: &[CurveSet]) -> Result<()> {
    if features.is_empty() {
        return Err(Error::DimensionMismatch("no features supplied".into()));
    }
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
    Ok(())
}

fn standardize_all(features: &[CurveSet]) -> Result<(Vec<CurveSet>, Vec<StandardizationRecord>)> {
    let pairs: Vec<(CurveSet, StandardizationRecord)> =
        features.par_iter().map(standardize).collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

fn prepare(
    response: &CurveSet,
    features: &[CurveSet],
    names: Option<Vec<String>>,
    opts: &FitOptions,
) -> Result<Prepared> {
    opts.validate()?;
    check_inputs(response, features)?;
    let (std_y, response_record) = standardize(response)?;
    let (std_x, feature_records) = standardize_all(features)?;
    let (design, basis) = match opts.k {
        Some(k) => {
            let basis = compute_fpc_fixed(&std_y, k)?;
            (design_on_basis(&std_y, &std_x, names, &basis)?, basis)
        }
        None => {
            let cap = opts.k_max.min(std_y.n()).min(std_y.m());
            build_design(&std_y, &std_x, names, opts.variance_threshold, cap)?
        }
    };
    Ok(Prepared {
        response: std_y,
        features: std_x,
        response_record,
        feature_records,
        design,
        basis,
    })
}

/// Original-scale surfaces and intercept from standardized score blocks.
///
/// With `S~ = E B_j E^T` on the standardized scale,
/// `S_j(s, t) = S~(s, t) sd_Y(t) / sd_Xj(s)` and
/// `a(t) = ave_Y(t) - sum_j int S_j(s, t) ave_Xj(s) ds`.
pub fn original_scale_model(
    grid: &Grid,
    selected: &[usize],
    coefficients: &BlockMatrix,
    basis: &FpcBasis,
    response_record: &StandardizationRecord,
    feature_records: &[StandardizationRecord],
) -> Result<FunctionalModel> {
    let m = grid.len();
    let w = grid.weights();
    let mut intercept = response_record.ave.clone();
    let mut surfaces = Vec::with_capacity(selected.len());
    for &j in selected {
        let rec = feature_records
            .get(j)
            .ok_or_else(|| Error::DimensionMismatch(format!("no record for feature {j}")))?;
        let block = coefficients.block(j).into_owned();
        let mut s = reconstruct_surface(&block, basis)?;
        for r in 0..m {
            for c in 0..m {
                s[(r, c)] *= response_record.sd[c] / rec.sd[r];
            }
        }
        for (c, a) in intercept.iter_mut().enumerate() {
            *a -= (0..m).map(|r| w[r] * rec.ave[r] * s[(r, c)]).sum::<f64>();
        }
        surfaces.push(s);
    }
    FunctionalModel::new(
        grid.clone(),
        feature_records.len(),
        selected.to_vec(),
        surfaces,
        intercept,
    )
}

/// Concatenated scores of `features` on `basis`, `n x (r k)`.
fn score_matrix(features: &[&CurveSet], basis: &FpcBasis) -> Result<DMatrix<f64>> {
    let k = basis.k();
    let n = features.first().map(|f| f.n()).unwrap_or(0);
    let mut x = DMatrix::zeros(n, k * features.len());
    for (j, f) in features.iter().enumerate() {
        x.columns_mut(j * k, k).copy_from(&project(f, basis)?);
    }
    Ok(x)
}

/// Picks the response basis size for the relaxed estimate on `selected` by
/// k-fold cross-validation of curve-space prediction error.
///
/// Each fold builds its basis from the training rows only. Returns the
/// chosen size and the error of every candidate in `candidates`.
pub fn choose_estimation_k(
    response: &CurveSet,
    features: &[CurveSet],
    selected: &[usize],
    candidates: &[usize],
    folds: usize,
    seed: u64,
) -> Result<(usize, Vec<(usize, f64)>)> {
    if selected.is_empty() || candidates.is_empty() {
        return Err(Error::InvalidParameter(
            "basis size choice needs a selection and candidates".into(),
        ));
    }
    let n = response.n();
    if folds < 2 || n < 2 * folds {
        return Err(Error::InvalidParameter(format!(
            "{folds}-fold choice of k needs at least {} curves, got {n}",
            2 * folds.max(2)
        )));
    }
    let labels = fold_assignment(n, folds, seed);
    let grid = response.grid().clone();
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds).map(|f| split(&labels, f)).collect();
    let jobs: Vec<(usize, usize)> = candidates
        .iter()
        .flat_map(|&k| (0..folds).map(move |f| (k, f)))
        .collect();
    let errs: Vec<Option<f64>> = jobs
        .par_iter()
        .map(|&(k, f)| {
            let (train, test) = &splits[f];
            let y_train = response.select_rows(train);
            let basis = match compute_fpc_fixed(&y_train, k) {
                Ok(b) => b,
                Err(Error::RankDeficient { .. }) => return Ok(None),
                Err(e) => return Err(e),
            };
            let x_train: Vec<CurveSet> = selected.iter().map(|&j| features[j].select_rows(train)).collect();
            let design = design_on_basis(&y_train, &x_train, None, &basis)?;
            let all: Vec<usize> = (0..selected.len()).collect();
            let b = relax_default(&design, &all)?;
            let x_test: Vec<CurveSet> = selected.iter().map(|&j| features[j].select_rows(test)).collect();
            let refs: Vec<&CurveSet> = x_test.iter().collect();
            let pred = basis.curves_from_scores(&(score_matrix(&refs, &basis)? * b.data()))?;
            let y_test = response.select_rows(test);
            let total: f64 = (0..test.len())
                .map(|i| {
                    let y = y_test.curve(i);
                    let r: Vec<f64> = y.iter().zip(pred.row(i).iter()).map(|(a, b)| a - b).collect();
                    grid.norm(&r) / grid.norm(&y).max(f64::MIN_POSITIVE)
                })
                .sum();
            Ok(Some(total / test.len() as f64))
        })
        .collect::<Result<_>>()?;

    let mut scores = Vec::new();
    for (ci, &k) in candidates.iter().enumerate() {
        let chunk = &errs[ci * folds..(ci + 1) * folds];
        if chunk.iter().all(|e| e.is_some()) {
            scores.push((k, chunk.iter().flatten().sum::<f64>() / folds as f64));
        }
    }
    let best = scores
        .iter()
        .copied()
        .fold(None, |acc: Option<(usize, f64)>, (k, e)| match acc {
            Some((_, be)) if be <= e => acc,
            _ => Some((k, e)),
        })
        .ok_or(Error::RankDeficient {
            available: 0,
            requested: candidates[0],
        })?;
    Ok((best.0, scores))
}

/// Path search with the configured criterion and adaptive stage.
///
/// Non-adaptive and soft-adaptive models report the relaxed estimate; the
/// full-adaptive model reports the penalized one. In soft mode the basis
/// size of the final relaxed fit is re-chosen by cross-validation.
pub fn fit_path(
    response: &CurveSet,
    features: &[CurveSet],
    names: Option<Vec<String>>,
    opts: &FitOptions,
) -> Result<FunctionalFit> {
    let start = Instant::now();
    let prep = prepare(response, features, names, opts)?;
    let outcome = select_model(&prep.design, &opts.path)?;
    let selected = outcome.selected();
    let p = prep.design.p();
    let mut estimation_basis = prep.basis.clone();
    let mut k_errors = Vec::new();
    let mut coefficients = outcome
        .estimate()
        .cloned()
        .unwrap_or_else(|| BlockMatrix::zeros(p, prep.basis.k(), prep.basis.k()));

    if opts.path.adaptive == AdaptiveMode::Soft && !selected.is_empty() {
        let k_sel = prep.basis.k();
        let cap = opts
            .soft_k_max
            .unwrap_or(opts.k_max)
            .min(prep.response.m())
            .min(prep.response.n() - prep.response.n().div_ceil(opts.path.cv_folds));
        let candidates: Vec<usize> = (k_sel..=cap.max(k_sel)).collect();
        let (k_est, errs) = choose_estimation_k(
            &prep.response,
            &prep.features,
            &selected,
            &candidates,
            opts.path.cv_folds,
            opts.path.seed,
        )?;
        k_errors = errs;
        if k_est != k_sel {
            let basis = compute_fpc_fixed(&prep.response, k_est)?;
            let sub: Vec<CurveSet> = selected.iter().map(|&j| prep.features[j].clone()).collect();
            let design = design_on_basis(&prep.response, &sub, None, &basis)?;
            let all: Vec<usize> = (0..selected.len()).collect();
            coefficients = relax_default(&design, &all)?.scatter(&selected, p);
            estimation_basis = basis;
        }
    }

    let model = original_scale_model(
        response.grid(),
        &selected,
        &coefficients,
        &estimation_basis,
        &prep.response_record,
        &prep.feature_records,
    )?;
    Ok(FunctionalFit {
        model,
        selection: Some(outcome),
        single: None,
        block_names: prep.design.block_names().to_vec(),
        basis: prep.basis,
        estimation_basis,
        k_errors,
        response_record: prep.response_record,
        feature_records: prep.feature_records,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

fn single_solve(
    design: &ScoreDesign,
    choice: LambdaChoice,
    path: &PathConfig,
) -> Result<SingleFit> {
    let ones = vec![1.0; design.p()];
    let lmax = lambda_max(design, &ones);
    let (lambda1, lambda2) = match choice {
        LambdaChoice::Relative(c) => {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("c_lambda = {c} must be positive")));
            }
            path.lambdas(c, lmax)
        }
        LambdaChoice::Absolute { lambda1, lambda2 } => (lambda1, lambda2),
    };
    let params = PenaltyParams::new(lambda1, lambda2, ones)?;
    let (solution, error) = match solve(design, &params, &path.solver, None) {
        Ok(s) => (s, None),
        Err(Error::MaxIterations { best, iterations, res3 }) => (
            *best,
            Some(format!("no convergence after {iterations} outer iterations (res3 = {res3:.3e})")),
        ),
        Err(e) => return Err(e),
    };
    let coefficients = solution.state.b.clone();
    Ok(SingleFit {
        lambda1,
        lambda2,
        lambda_max: lmax,
        selected: coefficients.nonzero_blocks(),
        coefficients,
        diagnostics: solution.diagnostics,
        error,
    })
}

/// Penalized estimate at one `(lambda1, lambda2)` pair, without relaxation.
pub fn fit_single(
    response: &CurveSet,
    features: &[CurveSet],
    names: Option<Vec<String>>,
    opts: &FitOptions,
    choice: LambdaChoice,
) -> Result<FunctionalFit> {
    let start = Instant::now();
    let prep = prepare(response, features, names, opts)?;
    let single = single_solve(&prep.design, choice, &opts.path)?;
    let model = original_scale_model(
        response.grid(),
        &single.selected,
        &single.coefficients,
        &prep.basis,
        &prep.response_record,
        &prep.feature_records,
    )?;
    Ok(FunctionalFit {
        model,
        selection: None,
        single: Some(single),
        block_names: prep.design.block_names().to_vec(),
        estimation_basis: prep.basis.clone(),
        basis: prep.basis,
        k_errors: Vec::new(),
        response_record: prep.response_record,
        feature_records: prep.feature_records,
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[derive(Debug, Clone)]
pub struct ScalarFit {
    pub model: ScalarModel,
    pub selection: Option<SelectionOutcome>,
    pub single: Option<SingleFit>,
    pub block_names: Vec<String>,
    pub k: usize,
    pub response_mean: f64,
    pub response_sd: f64,
    pub feature_records: Vec<StandardizationRecord>,
    pub elapsed_ms: f64,
}

impl ScalarFit {
    pub fn selected(&self) -> &[usize] {
        self.model.selected()
    }
}

struct ScalarPrepared {
    design: crate::scalar::ScalarDesign,
    mean: f64,
    sd: f64,
    feature_records: Vec<StandardizationRecord>,
}

fn prepare_scalar(
    response: &[f64],
    features: &[CurveSet],
    names: Option<Vec<String>>,
    opts: &FitOptions,
) -> Result<ScalarPrepared> {
    opts.validate()?;
    let n = response.len();
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "standardization needs at least 2 responses, got {n}"
        )));
    }
    let mean = response.iter().sum::<f64>() / n as f64;
    let sd = (response.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    if !(sd > 1e-12) {
        return Err(Error::DegenerateVariance { index: 0, sd });
    }
    let y: Vec<f64> = response.iter().map(|v| (v - mean) / sd).collect();
    if let Some(first) = features.first() {
        for f in &features[1..] {
            first.ensure_same_grid(f)?;
        }
    }
    let (std_x, feature_records) = standardize_all(features)?;
    let design = build_scalar_design(&y, &std_x, names, opts.variance_threshold, opts.k, opts.k_max)?;
    Ok(ScalarPrepared {
        design,
        mean,
        sd,
        feature_records,
    })
}

/// `beta_j(s) = sd_y beta~_j(s) / sd_Xj(s)` and
/// `a = mean_y - sum_j int beta_j(s) ave_Xj(s) ds`.
fn scalar_model(
    grid: &Grid,
    selected: &[usize],
    coefficients: &BlockMatrix,
    prep: &ScalarPrepared,
) -> Result<ScalarModel> {
    let mut intercept = prep.mean;
    let mut curves = Vec::with_capacity(selected.len());
    for &j in selected {
        let block: Vec<f64> = coefficients.block(j).iter().copied().collect();
        let rec = &prep.feature_records[j];
        let curve: Vec<f64> = reconstruct_coefficient_curve(&block, &prep.design.bases()[j])?
            .iter()
            .zip(&rec.sd)
            .map(|(b, s)| prep.sd * b / s)
            .collect();
        intercept -= grid.inner(&curve, &rec.ave);
        curves.push(curve);
    }
    ScalarModel::new(
        grid.clone(),
        prep.feature_records.len(),
        selected.to_vec(),
        curves,
        intercept,
    )
}

fn first_grid(features: &[CurveSet]) -> Result<&Grid> {
    features
        .first()
        .map(|f| f.grid())
        .ok_or_else(|| Error::DimensionMismatch("no features supplied".into()))
}

/// Scalar-on-function path search. Each feature has its own FPC basis.
pub fn fit_scalar_path(
    response: &[f64],
    features: &[CurveSet],
    names: Option<Vec<String>>,
    opts: &FitOptions,
) -> Result<ScalarFit> {
    let start = Instant::now();
    let grid = first_grid(features)?;
    let prep = prepare_scalar(response, features, names, opts)?;
    let outcome = select_model(prep.design.scores(), &opts.path)?;
    let selected = outcome.selected();
    let zeros = BlockMatrix::zeros(prep.design.p(), prep.design.k(), 1);
    let coefficients = outcome.estimate().unwrap_or(&zeros);
    let model = scalar_model(grid, &selected, coefficients, &prep)?;
    Ok(ScalarFit {
        model,
        selection: Some(outcome),
        single: None,
        block_names: prep.design.scores().block_names().to_vec(),
        k: prep.design.k(),
        response_mean: prep.mean,
        response_sd: prep.sd,
        feature_records: prep.feature_records.clone(),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Scalar-on-function penalized estimate at one penalty pair.
pub fn fit_scalar_single(
    response: &[f64],
    features: &[CurveSet],
    names: Option<Vec<String>>,
    opts: &FitOptions,
    choice: LambdaChoice,
) -> Result<ScalarFit> {
    let start = Instant::now();
    let grid = first_grid(features)?;
    let prep = prepare_scalar(response, features, names, opts)?;
    let single = single_solve(prep.design.scores(), choice, &opts.path)?;
    let model = scalar_model(grid, &single.selected, &single.coefficients, &prep)?;
    Ok(ScalarFit {
        model,
        selection: None,
        single: Some(single),
        block_names: prep.design.scores().block_names().to_vec(),
        k: prep.design.k(),
        response_mean: prep.mean,
        response_sd: prep.sd,
        feature_records: prep.feature_records.clone(),
        elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::{evaluate, gen_scenario, ScenarioConfig};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scenario(p0: usize, snr: f64, seed: u64) -> crate::simulation::Scenario {
        let cfg = ScenarioConfig {
            n: 90,
            p: 12,
            p0,
            snr,
            m: 40,
            seed,
            ..ScenarioConfig::default()
        };
        gen_scenario(&cfg, &cfg.grid().unwrap()).unwrap()
    }

    #[test]
    fn original_scale_reproduces_standardized_predictions() {
        let s = scenario(2, 10.0, 1);
        let opts = FitOptions {
            k: Some(3),
            ..FitOptions::default()
        };
        let fit = fit_single(&s.train.response, &s.train.features, None, &opts, LambdaChoice::Relative(0.3)).unwrap();
        let single = fit.single.as_ref().unwrap();
        assert!(!single.selected.is_empty());
        // Predict on the standardized scale and map back.
        let std_x: Vec<CurveSet> = s
            .train
            .features
            .iter()
            .zip(&fit.feature_records)
            .map(|(f, r)| r.apply(f).unwrap())
            .collect();
        let refs: Vec<&CurveSet> = std_x.iter().collect();
        let x = score_matrix(&refs, &fit.basis).unwrap();
        let std_pred = fit.basis.curves_from_scores(&(x * single.coefficients.data())).unwrap();
        let expected = fit.response_record.invert(&std_pred);
        let got = fit.model.predict(&s.train.features).unwrap();
        assert!((got - &expected).norm() <= 1e-8 * expected.norm());
    }

    #[test]
    fn noiseless_path_recovers_active_set() {
        let s = scenario(2, 1e8, 4);
        let fit = fit_path(&s.train.response, &s.train.features, None, &FitOptions::default()).unwrap();
        assert_eq!(fit.selected(), s.truth.active.as_slice());
        let m = evaluate(&fit.model, &s.truth, &s.test).unwrap();
        assert!(m.mse_out < 0.2, "mse_out {}", m.mse_out);
    }

    #[test]
    fn soft_mode_rechooses_k_from_candidates() {
        let s = scenario(2, 20.0, 6);
        let mut opts = FitOptions {
            soft_k_max: Some(6),
            ..FitOptions::default()
        };
        opts.path.adaptive = AdaptiveMode::Soft;
        let fit = fit_path(&s.train.response, &s.train.features, None, &opts).unwrap();
        assert!(!fit.k_errors.is_empty());
        assert_eq!(fit.k_errors[0].0, fit.basis.k());
        let best = fit
            .k_errors
            .iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        assert_eq!(fit.estimation_basis.k(), best.0);
        let init: Vec<usize> = fit.selection.as_ref().unwrap().initial.selected();
        assert!(fit.selected().iter().all(|j| init.contains(j)));
    }

    #[test]
    fn estimation_k_choice_is_deterministic() {
        let s = scenario(2, 10.0, 2);
        let (y, _) = standardize(&s.train.response).unwrap();
        let (x, _) = standardize_all(&s.train.features).unwrap();
        let a = choose_estimation_k(&y, &x, &s.truth.active, &[2, 3, 4], 5, 9).unwrap();
        let b = choose_estimation_k(&y, &x, &s.truth.active, &[2, 3, 4], 5, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.1.len(), 3);
    }

    #[test]
    fn scalar_path_recovers_signal() {
        let s = scenario(0, 10.0, 3);
        let grid = s.grid.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let beta: Vec<f64> = grid.points().iter().map(|t| (3.0 * t).sin()).collect();
        let y: Vec<f64> = (0..s.train.response.n())
            .map(|i| 2.0 + grid.inner(&s.train.features[5].curve(i), &beta) + 0.01 * rng.random_range(-1.0..1.0))
            .collect();
        let fit = fit_scalar_path(&y, &s.train.features, None, &FitOptions::default()).unwrap();
        assert_eq!(fit.selected(), &[5]);
        let pred = fit.model.predict(&s.train.features).unwrap();
        let err: f64 = pred.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let scale: f64 = y.iter().map(|v| (v - fit.response_mean).powi(2)).sum::<f64>().sqrt();
        assert!(err < 0.1 * scale, "err {err} scale {scale}");
    }

    #[test]
    fn constant_scalar_response_is_rejected() {
        let s = scenario(0, 10.0, 3);
        let y = vec![1.0; s.train.response.n()];
        assert!(matches!(
            fit_scalar_path(&y, &s.train.features, None, &FitOptions::default()),
            Err(Error::DegenerateVariance { .. })
        ));
    }
}
