//! Sparse function-on-function regression.
//!
//! Curves are reduced to functional principal component scores, and the
//! coefficient surfaces are estimated by a block elastic-net fitted with a
//! dual augmented Lagrangian solver. Model selection runs along a
//! regularization path with optional adaptive reweighting.

pub mod dal;
pub mod error;
pub mod functional;
pub mod io;
pub mod model;
pub mod penalty;
pub mod pipeline;
pub mod scalar;
pub mod selection;
pub mod simulation;

pub use error::{Error, Result};
