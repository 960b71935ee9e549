//! Plane-wave solver for the reduced Hartree model of a crystal and its linear and
//! nonlinear response to local perturbations.

pub mod bloch;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod lattice;
mod linalg;
pub mod periodic;
pub mod response;
pub mod scf;

#[cfg(test)]
mod testing;

pub use error::{Error, Result};
