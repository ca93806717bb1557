//! Continuum side of the coupling: Cauchy–Born energy density, lattice
//! stability constants, and the dislocation predictor.

pub mod cb;
pub mod stability;
pub mod ulin;

pub use cb::{CbDensity, CbTangent};
pub use stability::{stability_constant, DEFAULT_TORUS_N};
pub use ulin::{ScrewPredictor, CORE_OFFSET};
