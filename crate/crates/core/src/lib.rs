//! Slow motion of internal layers in viscous Burgers and Jin-Xin relaxation
//! models: finite-difference evolution, steady-layer families, spectra of
//! the linearized operators, and the reduced layer-position dynamics.

// `!(a < b)` is used on purpose so NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod evolve;
pub mod grid;
pub mod harness;
pub mod models;
pub mod reduction;
pub mod spectral;
pub mod steady;
pub mod tridiag;

pub use error::{Error, Result};
