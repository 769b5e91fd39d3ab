//! Certificates of polynomial nonnegativity over basic semialgebraic sets.
//!
//! Nonnegativity constraints are lowered to linear programs (DSOS),
//! second-order cone programs (SDSOS) or semidefinite programs (SOS) and
//! solved through a pluggable [`conic::Backend`]. Every returned certificate
//! can be re-checked by [`certify::verify_certificate`] without a solver.

pub mod barrier;
pub mod certify;
pub mod cones;
pub mod coverage;
pub mod conic;
pub mod poly;
pub mod roa;

pub use poly::{Monomial, Polynomial};
