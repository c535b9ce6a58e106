//! Quasi-static manipulation planning on implicit equilibrium manifolds.

// `!(x <= y)` is used on purpose so that NaN takes the failing branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod io;
pub mod manifold;
pub mod numerics;
pub mod planner;
pub mod potentials;

pub use error::{Error, Result};
