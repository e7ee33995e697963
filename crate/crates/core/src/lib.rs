//! Simulation and analysis of Ornstein–Uhlenbeck fields whose noise
//! intensity is a random branching catalyst.
//!
//! The crate is organised bottom-up:
//!
//! * [`kernels`]: heat kernels, FFT semigroups, Dirichlet eigensystems.
//! * [`superprocess`]: branching-particle catalysts and occupation integrals.
//! * [`dual_pde`]: the nonlinear dual evolution equation and the Laplace /
//!   characteristic-Laplace functionals built on it.
//! * [`gaussian_field`]: quenched covariances, eigenmode sampling, negative
//!   Sobolev norms and Hölder exponent estimates.
//! * [`moments`]: closed-form and quadrature moment formulas.
//! * [`affine_ref`]: finite-dimensional OU and CIR reference processes.
//!
//! Ensembles fan out over replicas with [`exec::map_replicas`]; results are
//! collected in replica order so every reduction is scheduling-independent.

pub mod affine_ref;
pub mod dual_pde;
pub mod error;
pub mod exec;
pub mod gaussian_field;
pub mod kernels;
pub mod moments;
pub mod quad;
pub mod rng;
pub mod special;
pub mod stats;
pub mod superprocess;

pub use error::{Error, Result};
