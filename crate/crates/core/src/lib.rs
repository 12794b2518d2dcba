//! Random projections for Euclidean set membership.
//!
//! A point `p` and a set `X` in a high-dimensional space are mapped by a
//! random Gaussian or Rademacher matrix `T` to `R^k`, and membership is decided
//! on the images. The crate provides the projection operators, the
//! closed-form bounds that say how large `k` must be, the geometric oracles
//! those bounds consume, deciders for finite sets, polytopes, cones and
//! integer fibers, and a Monte Carlo harness that checks every bound
//! empirically.

// `!(x > 0.0)` rejects NaN along with nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod membership;
pub mod montecarlo;
pub mod tail_bounds;

pub use error::{Error, Result};
