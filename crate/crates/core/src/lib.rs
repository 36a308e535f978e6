//! Laboratory for strong-stability-preserving implicit-explicit Runge-Kutta methods.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accuracy;
pub mod advdiff;
pub mod cli;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod linear;
pub mod monotonicity;
pub mod stepper;
pub mod tableau;

pub use error::{Error, Result};
