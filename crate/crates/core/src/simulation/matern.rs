use nalgebra::{Cholesky, DMatrix};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{CurveSet, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaternParams {
    pub eta2: f64,
    pub length: f64,
    pub nu: f64,
}

impl MaternParams {
    pub fn new(eta2: f64, length: f64, nu: f64) -> Result<Self> {
        let p = MaternParams { eta2, length, nu };
        p.validate()?;
        Ok(p)
    }

    /// Feature process: `eta2 = 1`, `l = 0.25`, `nu = 3.5`.
    pub fn features() -> Self {
        MaternParams {
            eta2: 1.0,
            length: 0.25,
            nu: 3.5,
        }
    }

    /// Error process shape: `eta2 = 1`, `l = 0.25`, `nu = 2.5`.
    pub fn errors() -> Self {
        MaternParams {
            eta2: 1.0,
            length: 0.25,
            nu: 2.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta2 > 0.0 && self.eta2.is_finite()) {
            return Err(Error::InvalidParameter("Matern variance must be positive".into()));
        }
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::InvalidParameter("Matern range must be positive".into()));
        }
        if ![0.5, 1.5, 2.5, 3.5].contains(&self.nu) {
            return Err(Error::UnsupportedSmoothness(self.nu));
        }
        Ok(())
    }
}

/// Half-integer Matern covariance at lag `|t - s|`.
pub fn matern_cov(t: f64, s: f64, params: &MaternParams) -> Result<f64> {
    params.validate()?;
    Ok(matern_lag((t - s).abs(), params))
}

fn matern_lag(d: f64, p: &MaternParams) -> f64 {
    let r = (2.0 * p.nu).sqrt() * d / p.length;
    let poly = if p.nu == 0.5 {
        1.0
    } else if p.nu == 1.5 {
        1.0 + r
    } else if p.nu == 2.5 {
        1.0 + r + r * r / 3.0
    } else {
        1.0 + r + 2.0 * r * r / 5.0 + r * r * r / 15.0
    };
    p.eta2 * poly * (-r).exp()
}

/// Gridded covariance matrix `C(t_a, t_b)`.
pub fn covariance_matrix(grid: &Grid, params: &MaternParams) -> Result<DMatrix<f64>> {
    params.validate()?;
    let t = grid.points();
    Ok(DMatrix::from_fn(t.len(), t.len(), |a, b| {
        matern_lag((t[a] - t[b]).abs(), params)
    }))
}

/// Lower Cholesky factor of the gridded covariance, with diagonal jitter
/// from `1e-10 eta2` growing tenfold up to `1e-6 eta2` if needed.
pub fn covariance_factor(grid: &Grid, params: &MaternParams) -> Result<DMatrix<f64>> {
    let cov = covariance_matrix(grid, params)?;
    let mut jitter = 1e-10 * params.eta2;
    while jitter <= 1e-6 * params.eta2 * (1.0 + 1e-9) {
        let mut c = cov.clone();
        for i in 0..c.nrows() {
            c[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(c) {
            return Ok(chol.l());
        }
        jitter *= 10.0;
    }
    Err(Error::FactorizationFailure(format!(
        "Matern covariance (l = {}, nu = {}) is not positive definite after jitter",
        params.length, params.nu
    )))
}

/// `n` draws `L z` with standard normal `z`, as rows.
pub(crate) fn draw_with_factor(n: usize, factor: &DMatrix<f64>, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = factor.nrows();
    let z = DMatrix::from_fn(m, n, |_, _| StandardNormal.sample(rng));
    (factor * z).transpose()
}

/// `n` independent zero-mean Gaussian process paths on `grid`.
pub fn sample_gp(n: usize, grid: &Grid, params: &MaternParams, seed: u64) -> Result<CurveSet> {
    let factor = covariance_factor(grid, params)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CurveSet::new(draw_with_factor(n, &factor, &mut rng), grid.clone())
}
