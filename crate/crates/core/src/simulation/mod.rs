//! Synthetic function-on-function data and evaluation metrics.

mod coefficients;
mod matern;
mod metrics;
mod scenario;

pub use coefficients::{
    bump_surface, gen_coefficients, gen_coefficients_with, Bump, CoefficientSurface, Regime,
};
pub use matern::{covariance_factor, covariance_matrix, matern_cov, sample_gp, MaternParams};
pub use metrics::{evaluate, metrics_from_parts, Metrics};
pub use scenario::{
    gen_scenario, pooled_variance, replicate_seed, GroundTruth, Sample, Scenario, ScenarioConfig,
};
