//! Numerical laboratory for the correspondence between smooth measures of
//! finite energy integrals and positive continuous additive functionals.
//!
//! The crate computes the energy metric ρ by quadrature, simulates PCAFs by
//! Monte Carlo under four model Hunt processes, and checks energy identities
//! and convergence (non-)equivalences on concrete measure families.

pub mod cantor;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod interval;
pub mod kernels;
pub mod measures;
pub mod models;
pub mod pcaf;
pub mod quad;
pub mod reduce;
pub mod simulate;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use interval::Interval;
pub use kernels::{energy, green, rho, GreenKernel, Potential};
pub use measures::{DensityFn, IntegrateOptions, SignedCombination, SmoothMeasure};
pub use models::ProcessModel;
