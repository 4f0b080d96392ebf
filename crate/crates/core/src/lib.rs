//! Monte Carlo laboratory for the zeros of random trigonometric polynomials
//! `f(t) = sum_{k=1}^n a_k cos kt + b_k sin kt` with dependent coefficients.

pub mod cli;
pub mod coeffgen;
pub mod error;
pub mod fourier;
pub mod oracle;
pub mod quadrature;
pub mod rng;
pub mod spectral;
pub mod stats;
pub mod trigpoly;
pub mod tvbound;
pub mod zeros;

pub use error::{Error, Result};
