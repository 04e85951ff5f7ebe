//! Independent checks for `catmap-core`: a grid quadrature oracle for torus
//! averages and shift sums.

pub mod quadrature;
