//! Euler characteristic curves of random Čech complexes: empirical curves
//! from point clouds, their thermodynamic limits through the excess mass
//! transform, and numerical recovery of the excess mass from a limit curve.

pub mod densities;
pub mod ecc;
mod error;
mod format;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod laplace;
pub mod limits;
pub mod numerics;
pub mod rng;

pub use error::{Error, Result};
pub use format::format_float;
