//! Plane-stress finite element simulation of interlaminar delamination with
//! zero-thickness cohesive elements, in a standard (penalty-like) and a
//! weighted-Nitsche stabilized formulation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod bench;
pub mod cli;
pub mod cohesive;
pub mod error;
pub mod linalg;
pub mod material;
pub mod mesh;
pub mod shape;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
