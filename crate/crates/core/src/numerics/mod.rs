//! Numerical building blocks: quadrature, special functions, extended
//! precision and finite differences.

pub mod dd;
pub mod fd;
pub mod quad;
pub mod special;

pub use dd::{Dd, DdComplex};
pub use quad::{tanh_sinh, tanh_sinh_half_line, Quadrature};
