//! Pseudo-spectral simulator for the 2½-D compressible viscous
//! non-resistive MHD perturbation system on a periodic box, with a
//! Littlewood-Paley/Besov diagnostic toolkit.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod integrator;
pub mod linear;
pub mod parallel;
pub mod littlewood_paley;
pub mod rhs;
pub mod spectral;
pub mod state;

pub use error::{Error, Result};
