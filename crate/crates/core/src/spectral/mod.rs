//! Periodic-box spectral infrastructure: grid, fields, transforms and
//! Fourier multipliers.

mod field;
mod grid;
pub mod ops;

pub use field::{random_spectrum, ScalarField, Spectrum, VectorField, VectorSpectrum};
pub use grid::SpectralGrid;
pub(crate) use field::same_grid;
pub use ops::{
    curl, dealias, divergence, fractional_laplacian, gradient, helmholtz_project,
    inverse_laplacian, laplacian,
};
