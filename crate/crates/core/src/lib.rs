//! Nehari-manifold and nonlinear generalized Rayleigh quotient solvers for
//! nonlinear elliptic variational problems on the unit interval, square and
//! cube.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod affine;
pub mod error;
pub mod fibering;
pub mod functionals;
pub mod mesh;
pub mod nonlinearity;
mod quad;
pub mod scalar;
pub mod solver;
pub mod validate;

pub use error::{Error, Result};
pub use functionals::{EnergyBreakdown, ModelKind, ModelSpec};
pub use mesh::{Field, Grid};
pub use nonlinearity::Nonlinearity;
pub use scalar::Scalar;

/// Version of this crate.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Grid64 = Grid<f64>;
pub type Field64 = Field<f64>;
pub type Grid32 = Grid<f32>;
pub type Field32 = Field<f32>;
