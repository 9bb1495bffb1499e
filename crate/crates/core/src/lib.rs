//! Hydrostatic Euler and semi-Lagrangian solvers on a periodic channel and
//! torus, with runtime evaluation of blow-up functionals, evolution
//! identities and their bounds.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod diagnostics;
pub mod grid;
pub mod hydrostatic;
pub mod logmean;
pub mod scenario;
pub mod semilagrangian;

pub use error::{Error, Result};
