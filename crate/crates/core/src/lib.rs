//! Variational tensor-product splines for `(D − α₁I)^{N₁} ⊗ (D − α₂I)^{N₂}`.
//!
//! One-dimensional operator machinery lives in [`odo`], the two-dimensional
//! spline object in [`spline`], measurement functionals in [`measurements`],
//! and the grid solver with extreme-point reduction in [`solver`].

// Negated float comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lasso;
pub mod measurements;
pub mod multidim;
pub mod odo;
pub mod ppe;
pub mod quadrature;
pub mod render;
pub mod scenarios;
pub mod solver;
pub mod spline;
pub mod verify;

pub use error::{Error, Result};
