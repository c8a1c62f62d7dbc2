//! Numerical library for bimodule quantum Markov semigroups on
//! finite-dimensional inclusions: quantum Fourier calculus on box spaces,
//! channel classification through Fourier multipliers, Lindbladian
//! construction and validation, detailed-balance symmetry analysis, and
//! entropy gradient flows with log-Sobolev and Talagrand certificates.

pub mod channel;
pub mod error;
pub mod generator;
pub mod gradientflow;
pub mod inclusion;
pub mod instances;
pub mod numerics;
pub mod symmetry;
pub mod tol;

pub use error::{Error, Result};
pub use tol::Tol;
