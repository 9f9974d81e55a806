//! Principal-component corrected regression estimates for association
//! studies: the PSC estimator (components of the full matrix) and the CPC
//! estimator (components of the matrix without the tested column), their
//! closed-form bias and variance, a bias-aware test, a Monte Carlo harness
//! and a per-covariate scan.

pub mod commands;
pub mod config;
pub mod error;
pub mod estimators;
pub mod inference;
pub mod io;
pub mod linalg;
pub mod manifest;
pub mod plot;
pub mod scan;
pub mod simulation;

pub use error::{Error, Result};
pub use estimators::{fit, FitResult, Method, TheoreticalMoments};
pub use linalg::{thin_svd, GenotypeMatrix, SpectralBasis};
pub use simulation::{Scenario, SimulationConfig};
