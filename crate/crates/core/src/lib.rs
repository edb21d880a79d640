//! Simulation of ambit random fields driven by Lévy bases, their surface
//! flux functionals, and the local limit fields those functionals converge to.

pub mod error;
pub mod field;
pub mod flux;
pub mod geometry;
pub mod harness;
pub mod levy;
pub mod limit;
pub mod quadrature;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
