//! Expectations of low-rank functions under an unnormalized truncated
//! multivariate normal, `∫_a^b H(x) exp(-½ xᵀAx) dx`, computed in O(N) by a
//! binary tree of Fourier-decoupled subproblems.
//!
//! Two matrix families are supported: constant symmetric tridiagonal matrices
//! ([`tridiag`]) and one-dimensional exponential covariance matrices
//! ([`expcov`]). The [`oracle`] module holds brute-force reference integrators.

pub mod error;
pub mod exec;
pub mod expcov;
pub mod fourier;
pub mod gemm;
pub mod greens;
pub mod lowrank;
pub mod oracle;
pub mod quadrature;
pub mod report;
pub mod scaled;
pub mod spec;
pub mod specfun;
pub mod tree;
pub mod tridiag;

pub mod cli;

pub use error::{Result, TmvnError};
pub use num_complex::Complex64 as Complex;
pub use scaled::Scaled;
