use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coefficients::{draw_surface, CoefficientSurface, Regime};
use super::matern::{covariance_factor, draw_with_factor, MaternParams};
use crate::error::{Error, Result};
use crate::functional::{CurveSet, Grid};

const STREAM_ACTIVE: u64 = 0;
const STREAM_COEF: u64 = 1;
const STREAM_NOISE: u64 = 2;
const STREAM_FEATURES: u64 = 1 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n: usize,
    pub p: usize,
    pub p0: usize,
    pub snr: f64,
    pub regime: Regime,
    pub seed: u64,
    /// Grid size on `[0, 1]`.
    pub m: usize,
    /// Range of bump amplitude magnitudes; the sign is random.
    pub amplitude: [f64; 2],
    pub feature_kernel: MaternParams,
    /// Shape of the error process; its variance is set by `snr`.
    pub error_kernel: MaternParams,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n: 300,
            p: 500,
            p0: 5,
            snr: 10.0,
            regime: Regime::Easy,
            seed: 0,
            m: 100,
            amplitude: [1.0, 3.0],
            feature_kernel: MaternParams::features(),
            error_kernel: MaternParams::errors(),
        }
    }
}

impl ScenarioConfig {
    pub fn n_test(&self) -> usize {
        self.n / 3
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.n < 2 {
            return bad(format!("n = {} must be at least 2", self.n));
        }
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if self.p0 > self.p {
            return bad(format!("p0 = {} exceeds p = {}", self.p0, self.p));
        }
        if !(self.snr > 0.0 && self.snr.is_finite()) {
            return bad(format!("snr = {} must be positive", self.snr));
        }
        if self.m < 3 {
            return bad(format!("grid size m = {} must be at least 3", self.m));
        }
        if !(self.amplitude[0] > 0.0 && self.amplitude[1] >= self.amplitude[0]) {
            return bad("amplitude range must be positive and ordered".into());
        }
        self.feature_kernel.validate()?;
        self.error_kernel.validate()
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::unit(self.m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub response: CurveSet,
    pub response_true: CurveSet,
    pub features: Vec<CurveSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub p: usize,
    /// Sorted indices of the features with a nonzero surface.
    pub active: Vec<usize>,
    /// Surfaces aligned with `active`.
    pub surfaces: Vec<CoefficientSurface>,
    /// Pooled variance of the noiseless training responses.
    pub signal_variance: f64,
    /// Target error variance `signal_variance / snr`.
    pub noise_variance: f64,
}

impl GroundTruth {
    pub fn surface(&self, j: usize) -> Option<&DMatrix<f64>> {
        self.active
            .iter()
            .position(|&a| a == j)
            .map(|i| &self.surfaces[i].values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub grid: Grid,
    pub train: Sample,
    pub test: Sample,
    pub truth: GroundTruth,
}

/// Variance pooled over all entries (divisor = number of entries).
pub fn pooled_variance(values: &DMatrix<f64>) -> f64 {
    let len = values.len();
    if len == 0 {
        return 0.0;
    }
    let mean = values.sum() / len as f64;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / len as f64
}

/// Independent seed for replicate `index` of a study seeded with `seed`.
pub fn replicate_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed
        .wrapping_add(0x9e37_79b9_7f4a_7c15)
        .wrapping_add(index.wrapping_mul(0xbf58_476d_1ce4_e5b9));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// `sum_j int S_j(s, t) X_j(s) ds` by trapezoid quadrature in `s`.
pub(crate) fn integrate_response(
    features: &[DMatrix<f64>],
    active: &[usize],
    surfaces: &[CoefficientSurface],
    grid: &Grid,
) -> DMatrix<f64> {
    let w = grid.weights();
    let n = features.first().map(|f| f.nrows()).unwrap_or(0);
    let mut y = DMatrix::zeros(n, grid.len());
    for (&j, s) in active.iter().zip(surfaces) {
        let mut xw = features[j].clone();
        for (c, mut col) in xw.column_iter_mut().enumerate() {
            col *= w[c];
        }
        y.gemm(1.0, &xw, &s.values, 1.0);
    }
    y
}

fn rescale(noise: &mut DMatrix<f64>, target: f64) {
    let v = pooled_variance(noise);
    if v > 0.0 {
        *noise *= (target / v).sqrt();
    }
}

/// Training and test samples from the function-on-function model with
/// Matern features and errors.
///
/// The error variance is `var(Y_true) / snr` with `var` pooled over all
/// training curves and grid points; each error sample is rescaled to match
/// it exactly. With no active feature the error kernel's own variance
/// divided by `snr` is used.
pub fn gen_scenario(config: &ScenarioConfig, grid: &Grid) -> Result<Scenario> {
    config.validate()?;
    let (n, nt, p) = (config.n, config.n_test(), config.p);
    let seed = config.seed;

    let mut active: Vec<usize> = sample(&mut stream(seed, STREAM_ACTIVE), p, config.p0).into_vec();
    active.sort_unstable();
    let mut coef_rng = stream(seed, STREAM_COEF);
    let surfaces: Vec<CoefficientSurface> = (0..config.p0)
        .map(|_| draw_surface(config.regime, config.amplitude, grid, &mut coef_rng))
        .collect();

    let feature_factor = covariance_factor(grid, &config.feature_kernel)?;
    let draws: Vec<DMatrix<f64>> = (0..p)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream(seed, STREAM_FEATURES + j as u64);
            draw_with_factor(n + nt, &feature_factor, &mut rng)
        })
        .collect();
    let train_x: Vec<DMatrix<f64>> = draws.iter().map(|d| d.rows(0, n).into_owned()).collect();
    let test_x: Vec<DMatrix<f64>> = draws.iter().map(|d| d.rows(n, nt).into_owned()).collect();
    drop(draws);

    let y_train = integrate_response(&train_x, &active, &surfaces, grid);
    let y_test = integrate_response(&test_x, &active, &surfaces, grid);
    let signal_variance = pooled_variance(&y_train);
    let noise_variance = if signal_variance > 0.0 {
        signal_variance / config.snr
    } else {
        config.error_kernel.eta2 / config.snr
    };

    let error_factor = covariance_factor(grid, &config.error_kernel)?;
    let mut noise_rng = stream(seed, STREAM_NOISE);
    let mut e_train = draw_with_factor(n, &error_factor, &mut noise_rng);
    let mut e_test = draw_with_factor(nt, &error_factor, &mut noise_rng);
    rescale(&mut e_train, noise_variance);
    rescale(&mut e_test, noise_variance);

    let curves = |m: DMatrix<f64>| CurveSet::new(m, grid.clone());
    let train = Sample {
        response: curves(&y_train + e_train)?,
        response_true: curves(y_train)?,
        features: train_x.into_iter().map(curves).collect::<Result<_>>()?,
    };
    let test = Sample {
        response: curves(&y_test + e_test)?,
        response_true: curves(y_test)?,
        features: test_x.into_iter().map(curves).collect::<Result<_>>()?,
    };
    Ok(Scenario {
        config: config.clone(),
        grid: grid.clone(),
        train,
        test,
        truth: GroundTruth {
            p,
            active,
            surfaces,
            signal_variance,
            noise_variance,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(p0: usize, snr: f64) -> ScenarioConfig {
        ScenarioConfig {
            n: 30,
            p: 8,
            p0,
            snr,
            m: 40,
            seed: 3,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn test_size_is_a_third() {
        let cfg = small(2, 10.0);
        let s = gen_scenario(&cfg, &cfg.grid().unwrap()).unwrap();
        assert_eq!(s.test.response.n(), 10);
        assert_eq!(s.train.features.len(), 8);
        assert_eq!(s.truth.active.len(), 2);
    }

    #[test]
    fn vanishing_noise_recovers_truth() {
        let cfg = small(3, 1e12);
        let s = gen_scenario(&cfg, &cfg.grid().unwrap()).unwrap();
        let diff = (s.train.response.values() - s.train.response_true.values()).norm();
        assert!(diff <= 1e-4 * s.train.response_true.values().norm());
    }

    #[test]
    fn no_active_features_gives_pure_noise() {
        let cfg = small(0, 10.0);
        let s = gen_scenario(&cfg, &cfg.grid().unwrap()).unwrap();
        assert_eq!(s.train.response_true.values().abs().max(), 0.0);
        assert!(s.train.response.values().abs().max() > 0.0);
    }

    #[test]
    fn realized_noise_ratio_matches_snr() {
        let cfg = small(3, 10.0);
        let s = gen_scenario(&cfg, &cfg.grid().unwrap()).unwrap();
        let e = s.train.response.values() - s.train.response_true.values();
        let ratio = pooled_variance(&e) / pooled_variance(s.train.response_true.values());
        assert!((ratio * 10.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn inactive_features_do_not_enter_response() {
        let cfg = small(2, 1e12);
        let s = gen_scenario(&cfg, &cfg.grid().unwrap()).unwrap();
        let xs: Vec<DMatrix<f64>> = s.train.features.iter().map(|f| f.values().clone()).collect();
        let y = integrate_response(&xs, &s.truth.active, &s.truth.surfaces, &s.grid);
        assert_eq!(&y, s.train.response_true.values());
        for j in 0..8 {
            assert_eq!(s.truth.surface(j).is_some(), s.truth.active.contains(&j));
        }
    }

    #[test]
    fn generation_is_pure() {
        let cfg = small(2, 10.0);
        let g = cfg.grid().unwrap();
        assert_eq!(gen_scenario(&cfg, &g).unwrap(), gen_scenario(&cfg, &g).unwrap());
    }

    #[test]
    fn invalid_sparsity_is_rejected() {
        let mut cfg = small(2, 10.0);
        cfg.p0 = 9;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn replicate_seeds_differ() {
        let s: Vec<u64> = (0..10).map(|i| replicate_seed(42, i)).collect();
        let mut d = s.clone();
        d.sort_unstable();
        d.dedup();
        assert_eq!(d.len(), 10);
    }
}
