//! Numerical laboratory for Sobolev functions on sequences of varying domains.

// Negated comparisons deliberately reject NaN parameters.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod compare;
pub mod dictionary;
pub mod error;
pub mod experiment;
pub mod field;
pub mod gallery;
pub mod grid;
pub mod linalg;
pub mod pde;
pub mod poincare;
pub mod ze;

pub use error::{Error, Result};
