//! Lattice laboratory for reflected backward SDEs with monotone generators.
//!
//! The driving Brownian motion is replaced by a recombining binomial walk on
//! which conditional expectations, stopping problems and pathwise functionals
//! are computed exactly (or by seeded sampling, with error bars, when the
//! path count is too large). On top of that model the crate provides:
//!
//! * [`bsde`]: implicit-in-y backward Euler for the plain equation;
//! * [`reflect`]: the obstacle-projection scheme, the implicit penalization
//!   scheme, penalization sweeps and minimality diagnostics;
//! * [`picard`]: the z-frozen reflected solve and Picard iteration over z on
//!   a block schedule;
//! * [`analysis`]: S^p / H^p / class-D norms, a priori estimate ratios,
//!   comparison checks and discrete Tanaka identities;
//! * [`harness`]: independent oracles, convergence studies, CSV output and the
//!   `rbsde` command line.

pub mod analysis;
pub mod bsde;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod picard;
pub mod problem;
pub mod reflect;

pub use error::{Error, Result};
