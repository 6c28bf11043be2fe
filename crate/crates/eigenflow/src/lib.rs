//! Forced mean curvature flow on closed convex triangle meshes, with
//! first-eigenvalue tracking for the Laplace and p-Laplace operators.
//!
//! The crate evolves a surface under ∂X/∂t = −Hν + κ(t)X, computes the
//! first nonzero closed eigenpairs along the way, and provides checkers
//! for the exponential eigenvalue lower bound, the eigenvalue evolution
//! equations, comparison barriers, and monotone regimes. Exact sphere
//! solutions serve as oracles throughout.
//!
//! Per-face loops (geometry cache, operator assembly, quadrature) run on
//! rayon when the default `parallel` feature is enabled; reductions are
//! ordered so results are bit-identical to the sequential fallback.

// `!(x > 0.0)` deliberately treats NaN as a validation failure; the
// suggested `x <= 0.0` would wave NaN through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod flow;
pub mod forcing;
pub mod geometry;
pub mod mesh;
pub mod monotonicity;
pub mod pipeline;
pub mod spectrum;
pub mod sphere;
pub mod trace;
mod util;

pub use error::{Error, Result};
