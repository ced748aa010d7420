mod common;

use fdal_core::functional::{CurveSet, Grid};
use fdal_core::pipeline::{fit_path, fit_scalar_path, fit_single, FitOptions, LambdaChoice};
use fdal_core::selection::AdaptiveMode;
use fdal_core::simulation::{gen_scenario, sample_gp, MaternParams, Regime, Scenario, ScenarioConfig};
use nalgebra::DMatrix;
use rand::Rng;

fn scenario(seed: u64, snr: f64) -> Scenario {
    let cfg = ScenarioConfig {
        n: 150,
        p: 30,
        p0: 3,
        snr,
        regime: Regime::Easy,
        seed,
        m: 50,
        ..ScenarioConfig::default()
    };
    gen_scenario(&cfg, &cfg.grid().unwrap()).unwrap()
}

/// Fitted curves computed directly on the standardized scale and mapped back.
fn standardized_prediction(
    fit: &fdal_core::pipeline::FunctionalFit,
    features: &[CurveSet],
    blocks: &DMatrix<f64>,
) -> DMatrix<f64> {
    let grid = features[0].grid();
    let w = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(grid.weights()));
    let phi = fit.basis.functions();
    let k = fit.basis.k();
    let n = features[0].n();
    let mut yhat = DMatrix::zeros(n, grid.len());
    for (j, x) in features.iter().enumerate() {
        let rec = &fit.feature_records[j];
        let xs = DMatrix::from_fn(n, grid.len(), |i, c| (x.values()[(i, c)] - rec.ave[c]) / rec.sd[c]);
        let scores = &xs * &w * phi;
        let bj = blocks.rows(j * k, k);
        yhat += scores * bj * phi.transpose();
    }
    let r = &fit.response_record;
    DMatrix::from_fn(n, grid.len(), |i, c| yhat[(i, c)] * r.sd[c] + r.ave[c])
}

#[test]
fn original_scale_model_reproduces_standardized_fit() {
    let s = scenario(1, 10.0);
    let opts = FitOptions::default();
    let fit = fit_path(&s.train.response, &s.train.features, None, &opts).unwrap();
    let outcome = fit.selection.as_ref().unwrap();
    let blocks = outcome.estimate().unwrap().data().clone();
    let want = standardized_prediction(&fit, &s.test.features, &blocks);
    let got = fit.model.predict(&s.test.features).unwrap();
    let err = (&got - &want).amax();
    assert!(err <= 1e-9 * (1.0 + want.amax()), "max deviation {err}");
}

#[test]
fn single_fit_maps_back_the_same_way() {
    let s = scenario(2, 10.0);
    let opts = FitOptions { k: Some(3), ..FitOptions::default() };
    let fit = fit_single(&s.train.response, &s.train.features, None, &opts, LambdaChoice::Relative(0.3)).unwrap();
    let single = fit.single.as_ref().unwrap();
    assert!((single.lambda1 - 0.3 * single.lambda_max).abs() <= 1e-12 * single.lambda_max);
    assert!((single.lambda2 - 4.0 * single.lambda1).abs() <= 1e-9 * single.lambda2);
    let want = standardized_prediction(&fit, &s.train.features, single.coefficients.data());
    let got = fit.model.predict(&s.train.features).unwrap();
    assert!((&got - &want).amax() <= 1e-9 * (1.0 + want.amax()));
}

#[test]
fn high_snr_path_recovers_the_active_set() {
    for seed in [3, 4] {
        let s = scenario(seed, 100.0);
        let fit = fit_path(&s.train.response, &s.train.features, None, &FitOptions::default()).unwrap();
        assert_eq!(fit.selected(), s.truth.active.as_slice(), "seed {seed}");
    }
}

#[test]
fn adaptive_modes_keep_a_subset_of_the_initial_selection() {
    let s = scenario(5, 10.0);
    for mode in [AdaptiveMode::Full, AdaptiveMode::Soft] {
        let mut opts = FitOptions::default();
        opts.path.adaptive = mode;
        let fit = fit_path(&s.train.response, &s.train.features, None, &opts).unwrap();
        let outcome = fit.selection.as_ref().unwrap();
        let initial = outcome.initial.selected();
        assert!(fit.selected().iter().all(|j| initial.contains(j)), "{mode:?}");
        let adaptive = outcome.adaptive.as_ref().unwrap();
        assert_eq!(adaptive.candidates, initial);
    }
}

#[test]
fn soft_mode_estimation_k_is_chosen_from_candidates() {
    let s = scenario(6, 10.0);
    let mut opts = FitOptions::default();
    opts.path.adaptive = AdaptiveMode::Soft;
    let fit = fit_path(&s.train.response, &s.train.features, None, &opts).unwrap();
    let best = fit
        .k_errors
        .iter()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
        .unwrap();
    assert_eq!(fit.estimation_basis.k(), best.0);
    assert_eq!(fit.k_errors.first().unwrap().0, fit.basis.k());
}

#[test]
fn scalar_path_finds_the_relevant_feature() {
    let grid = Grid::unit(40).unwrap();
    let feats: Vec<CurveSet> = (0..8)
        .map(|j| sample_gp(120, &grid, &MaternParams::features(), 700 + j).unwrap())
        .collect();
    let beta: Vec<f64> = grid.points().iter().map(|t| (std::f64::consts::PI * t).sin() * 3.0).collect();
    let mut r = common::rng(8);
    let y: Vec<f64> = (0..120)
        .map(|i| 2.0 + grid.inner(&feats[5].curve(i), &beta) + r.random_range(-0.05..0.05))
        .collect();
    let fit = fit_scalar_path(&y, &feats, None, &FitOptions::default()).unwrap();
    assert!(fit.selected().contains(&5), "{:?}", fit.selected());
    let pred = fit.model.predict(&feats).unwrap();
    let rss: f64 = pred.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum();
    let tss: f64 = y.iter().map(|v| (v - fit.response_mean).powi(2)).sum();
    assert!(rss / tss < 0.1, "r2 deficit {}", rss / tss);
}

#[test]
fn constant_response_is_rejected() {
    let grid = Grid::unit(20).unwrap();
    let feats = vec![sample_gp(30, &grid, &MaternParams::features(), 1).unwrap()];
    assert!(fit_scalar_path(&[1.0; 30], &feats, None, &FitOptions::default()).is_err());
}
