mod common;

use common::*;
use fdal_core::functional::Grid;
use fdal_core::simulation::{
    covariance_factor, gen_coefficients, gen_scenario, matern_cov, pooled_variance, sample_gp,
    MaternParams, Regime, ScenarioConfig,
};
use nalgebra::DVector;
use statrs::distribution::{ContinuousCDF, Normal};

#[test]
fn matern_matches_bessel_form() {
    for nu in [0.5, 1.5, 2.5, 3.5] {
        for length in [0.1, 0.25, 0.7] {
            let params = MaternParams::new(1.7, length, nu).unwrap();
            for d in [0.0, 0.01, 0.1, 0.3, 0.9] {
                let got = matern_cov(0.2, 0.2 + d, &params).unwrap();
                let want = matern_reference(d, 1.7, length, nu);
                assert!((got - want).abs() <= 1e-8, "nu {nu}, l {length}, d {d}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn matern_rejects_other_smoothness() {
    assert!(MaternParams::new(1.0, 0.25, 1.0).is_err());
    assert!(MaternParams::new(1.0, -0.25, 1.5).is_err());
}

#[test]
fn covariance_factor_reproduces_the_kernel() {
    let grid = Grid::unit(60).unwrap();
    let params = MaternParams::features();
    let l = covariance_factor(&grid, &params).unwrap();
    let c = &l * l.transpose();
    let t = grid.points();
    let mut worst = 0.0_f64;
    for a in 0..t.len() {
        for b in 0..t.len() {
            worst = worst.max((c[(a, b)] - matern_reference((t[a] - t[b]).abs(), 1.0, 0.25, 3.5)).abs());
        }
    }
    // The factor may carry a small diagonal jitter.
    assert!(worst <= 1e-6, "max deviation {worst}");
}

#[test]
fn gp_draws_have_the_target_moments() {
    let grid = Grid::unit(51).unwrap();
    for (i, params) in [MaternParams::features(), MaternParams::errors()].iter().enumerate() {
        let draws = sample_gp(4000, &grid, params, 90 + i as u64).unwrap();
        let v = draws.values();
        let n = v.nrows() as f64;
        let mean: f64 = v.iter().sum::<f64>() / v.len() as f64;
        assert!(mean.abs() < 0.05, "grand mean {mean}");
        let t = grid.points();
        for (a, b) in [(0, 0), (10, 15), (20, 30), (5, 40)] {
            let cov = v.column(a).dot(&v.column(b)) / n;
            let want = matern_reference((t[a] - t[b]).abs(), params.eta2, params.length, params.nu);
            assert!((cov - want).abs() < 0.08, "({a}, {b}): {cov} vs {want}");
        }
    }
}

#[test]
fn bump_mass_matches_the_normal_box_probability() {
    let grid = Grid::unit(201).unwrap();
    let w = DVector::from_vec(grid.weights());
    let std = Normal::new(0.0, 1.0).unwrap();
    for regime in [Regime::Easy, Regime::Difficult] {
        for surface in gen_coefficients(8, regime, &grid, 31) {
            let mass = (w.transpose() * &surface.values * &w)[(0, 0)];
            let want: f64 = surface
                .bumps
                .iter()
                .map(|b| {
                    let side = |c: f64| std.cdf((1.0 - c) / b.sd) - std.cdf(-c / b.sd);
                    b.amplitude * side(b.center[0]) * side(b.center[1])
                })
                .sum();
            let scale: f64 = surface.bumps.iter().map(|b| b.amplitude.abs()).sum();
            assert!((mass - want).abs() <= 0.02 * scale, "{regime:?}: {mass} vs {want}");
        }
    }
}

#[test]
fn bump_regimes_follow_their_ranges() {
    let grid = Grid::unit(30).unwrap();
    for s in gen_coefficients(50, Regime::Easy, &grid, 1) {
        assert_eq!(s.bumps.len(), 1);
        assert!((0.2..=0.3).contains(&s.bumps[0].sd));
    }
    for s in gen_coefficients(50, Regime::Difficult, &grid, 2) {
        assert!((2..=3).contains(&s.bumps.len()));
        for b in &s.bumps {
            assert!((0.01..=0.15).contains(&b.sd));
            assert!((1.0..=3.0).contains(&b.amplitude.abs()));
        }
    }
}

#[test]
fn scenario_noise_matches_the_snr() {
    for (i, snr) in [2.0, 20.0].into_iter().enumerate() {
        let cfg = ScenarioConfig { n: 240, p: 12, p0: 3, snr, seed: 40 + i as u64, ..ScenarioConfig::default() };
        let s = gen_scenario(&cfg, &cfg.grid().unwrap()).unwrap();
        let e = s.train.response.values() - s.train.response_true.values();
        let ratio = pooled_variance(&e) * snr / s.truth.signal_variance;
        assert!((ratio - 1.0).abs() < 0.05, "snr {snr}: ratio {ratio}");
        assert_eq!(s.test.response.n(), cfg.n_test());
        assert_eq!(s.truth.active.len(), 3);
    }
}

#[test]
fn scenarios_are_reproducible() {
    let cfg = ScenarioConfig { n: 30, p: 6, p0: 2, m: 20, seed: 9, ..ScenarioConfig::default() };
    let grid = cfg.grid().unwrap();
    let a = gen_scenario(&cfg, &grid).unwrap();
    let b = gen_scenario(&cfg, &grid).unwrap();
    assert_eq!(a, b);
    let other = gen_scenario(&ScenarioConfig { seed: 10, ..cfg }, &grid).unwrap();
    assert_ne!(a.train.response, other.train.response);
}

#[test]
fn bessel_oracle_is_consistent_with_closed_form_half_order() {
    // K_{1/2}(x) = sqrt(pi / (2x)) exp(-x).
    for x in [0.1, 1.0, 5.0] {
        let want = (std::f64::consts::PI / (2.0 * x)).sqrt() * (-x).exp();
        assert!((bessel_k(0.5, x) - want).abs() <= 1e-10 * want.max(1.0));
    }
}
