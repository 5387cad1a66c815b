//! Desk-scale numerics for Gaussian cylindrical measures and the dynamics
//! whose equilibria they describe.
//!
//! Modules:
//! - [`spectral`]: Dirichlet/torus/oscillator spectra, Riesz and Dirichlet
//!   Green functions, momentum-space trace integrals.
//! - [`measure`]: Karhunen–Loève sampling, characteristic functionals,
//!   support classification, Kakutani dichotomy, path regularity.
//! - [`renorm`]: analytic-regularization probes (coupling, Green-matrix
//!   determinants, series bound, Gaussian quartic reduction).
//! - [`propagator`]: per-mode Euclidean kernels and an exact lattice oracle.
//! - [`langevin`]: Galerkin-truncated Langevin dynamics and Gibbs tests.
//! - [`ergodic`]: thermostatted lattice string, Gibbs and bridge averages.
//!
//! Every stochastic routine takes an explicit seed and is bit-reproducible.

#![forbid(unsafe_code)]

pub mod error;
pub mod ergodic;
pub mod langevin;
pub mod linalg;
pub mod measure;
pub mod propagator;
pub mod quad;
pub mod renorm;
pub mod rng;
pub mod spectral;
pub mod stats;

pub use error::{LabError, Result};
