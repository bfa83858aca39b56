//! Periodic 2D vector fields: transforms, norms, Leray projection and dealiasing.

mod grid;
pub mod random;
mod spectral;

pub use grid::Grid;
pub use spectral::{NormReport, Samples, SpectralField};
pub(crate) use spectral::scalar_forward;
