//! Differentiable BEV raycasting, self-supervised occupancy recovery from
//! LiDAR sweeps, and max-margin trajectory planning on space-time grids.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod eval;
pub mod geom;
pub mod grid;
pub mod io;
pub mod learn;
pub mod plan;
pub mod raycast;
pub mod sim;

mod error;

pub use error::{Error, Result};
