use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::functional::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// One bump, sd ~ U[0.2, 0.3].
    #[default]
    Easy,
    /// Two or three bumps, sd ~ U[0.01, 0.15].
    Difficult,
}

/// Isotropic bivariate normal density scaled by `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    /// `(s, t)`: feature argument, response argument.
    pub center: [f64; 2],
    pub sd: f64,
    pub amplitude: f64,
}

impl Bump {
    pub fn value(&self, s: f64, t: f64) -> f64 {
        let ds = s - self.center[0];
        let dt = t - self.center[1];
        let v = self.sd * self.sd;
        self.amplitude * (-(ds * ds + dt * dt) / (2.0 * v)).exp() / (2.0 * PI * v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientSurface {
    pub bumps: Vec<Bump>,
    /// `m x m`, rows indexed by `s`, columns by `t`.
    pub values: DMatrix<f64>,
}

/// Sum of bumps evaluated on the grid tensor.
pub fn bump_surface(bumps: &[Bump], grid: &Grid) -> DMatrix<f64> {
    let t = grid.points();
    DMatrix::from_fn(t.len(), t.len(), |a, b| {
        bumps.iter().map(|bp| bp.value(t[a], t[b])).sum()
    })
}

pub(crate) fn draw_surface(
    regime: Regime,
    amplitude: [f64; 2],
    grid: &Grid,
    rng: &mut ChaCha8Rng,
) -> CoefficientSurface {
    let (count, sd_range) = match regime {
        Regime::Easy => (1, (0.2, 0.3)),
        Regime::Difficult => (if rng.random_bool(0.5) { 2 } else { 3 }, (0.01, 0.15)),
    };
    let bumps: Vec<Bump> = (0..count)
        .map(|_| {
            let center = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let sd = rng.random_range(sd_range.0..sd_range.1);
            let mag = if amplitude[1] > amplitude[0] {
                rng.random_range(amplitude[0]..amplitude[1])
            } else {
                amplitude[0]
            };
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            Bump {
                center,
                sd,
                amplitude: sign * mag,
            }
        })
        .collect();
    let values = bump_surface(&bumps, grid);
    CoefficientSurface { bumps, values }
}

/// `p0` random coefficient surfaces with amplitudes `|a| ~ U[1, 3]`.
pub fn gen_coefficients(p0: usize, regime: Regime, grid: &Grid, seed: u64) -> Vec<CoefficientSurface> {
    gen_coefficients_with(p0, regime, [1.0, 3.0], grid, seed)
}

/// As [`gen_coefficients`] with amplitude magnitudes drawn from `amplitude`.
pub fn gen_coefficients_with(
    p0: usize,
    regime: Regime,
    amplitude: [f64; 2],
    grid: &Grid,
    seed: u64,
) -> Vec<CoefficientSurface> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..p0)
        .map(|_| draw_surface(regime, amplitude, grid, &mut rng))
        .collect()
}
