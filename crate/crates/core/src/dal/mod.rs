//! Dual augmented Lagrangian solver for the block elastic-net problem.

mod newton;
mod objective;
mod solver;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::penalty::BlockMatrix;

pub use newton::{
    build_newton_system, newton_direction, ActiveBlock, NewtonMode, NewtonSystem, SolverMode,
};
pub use objective::{
    augmented_lagrangian, dual_objective, h_star, kkt_residuals, primal_objective, psi_gradient,
    psi_value, z_update, KktResiduals,
};
pub(crate) use objective::x_times;
pub use solver::solve;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct DalConfig {
    pub tol_kkt3: f64,
    pub tol_kkt1: f64,
    /// Defaults to `max(5/p, 1e-4)` when absent.
    pub sigma0: Option<f64>,
    pub sigma_growth: f64,
    pub sigma_cap: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub mode: SolverMode,
}

impl Default for DalConfig {
    fn default() -> Self {
        DalConfig {
            tol_kkt3: 1e-6,
            tol_kkt1: 1e-6,
            sigma0: None,
            sigma_growth: 5.0,
            sigma_cap: 1e4,
            max_outer: 100,
            max_inner: 100,
            mode: SolverMode::Auto,
        }
    }
}

impl DalConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.into()));
        if !(self.tol_kkt3 > 0.0 && self.tol_kkt1 > 0.0) {
            return bad("tolerances must be positive");
        }
        if !(self.sigma_growth > 1.0) {
            return bad("sigma_growth must exceed 1");
        }
        if !(self.sigma_cap > 0.0 && self.sigma_cap.is_finite()) {
            return bad("sigma_cap must be positive");
        }
        if let Some(s) = self.sigma0 {
            if !(s > 0.0 && s.is_finite()) {
                return bad("sigma0 must be positive");
            }
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration limits must be positive");
        }
        Ok(())
    }

    pub fn initial_sigma(&self, p: usize) -> f64 {
        self.sigma0
            .unwrap_or_else(|| (5.0 / p.max(1) as f64).max(1e-4))
            .min(self.sigma_cap)
    }
}

/// Iterate of the solver. `b` is both the multiplier and the primal estimate.
#[derive(Debug, Clone)]
pub struct DalState {
    pub v: DMatrix<f64>,
    pub z: BlockMatrix,
    pub b: BlockMatrix,
    pub sigma: f64,
    /// Blocks with a nonzero coefficient.
    pub active: Vec<usize>,
}

impl DalState {
    pub fn r(&self) -> usize {
        self.active.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OuterRecord {
    pub sigma: f64,
    pub r: usize,
    pub res1: f64,
    pub res3: f64,
    pub psi: f64,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub newton_steps: usize,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct DalDiagnostics {
    pub outer: Vec<OuterRecord>,
    pub converged: bool,
    pub newton_steps: usize,
    pub newton_solves: usize,
    /// Newton steps that needed at least one halving.
    pub safeguard_steps: usize,
    pub stalled_inner: usize,
    pub newton_time_ms: f64,
    pub res1: f64,
    pub res3: f64,
    pub primal_obj: f64,
    pub dual_obj: f64,
    pub elapsed_ms: f64,
}

impl DalDiagnostics {
    pub fn outer_iterations(&self) -> usize {
        self.outer.len()
    }

    /// `|primal + dual| / (1 + |primal|)`.
    pub fn relative_gap(&self) -> f64 {
        (self.primal_obj + self.dual_obj).abs() / (1.0 + self.primal_obj.abs())
    }
}

#[derive(Debug, Clone)]
pub struct DalSolution {
    pub state: DalState,
    pub diagnostics: DalDiagnostics,
}

impl DalSolution {
    pub fn coefficients(&self) -> &BlockMatrix {
        &self.state.b
    }
}
