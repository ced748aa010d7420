//! Discretized functional data: grids, curve sets, standardization, FPC
//! bases and the score-space design built from them.
//!
//! All inner products use the trapezoid rule on a uniform grid.

mod curves;
mod design;
mod fpc;
mod grid;

pub use curves::{standardize, CurveSet, StandardizationRecord, MIN_POINTWISE_SD};
pub use design::{build_design, default_names, design_on_basis, ScoreDesign};
pub use fpc::{
    compute_fpc, compute_fpc_fixed, project, reconstruct_surface, FpcBasis, DEFAULT_K_MAX,
};
pub use grid::Grid;
