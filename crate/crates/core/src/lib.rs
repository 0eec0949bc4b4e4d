//! Spectra, auxiliary generalized Brillouin zones, winding numbers and
//! spectral self-intersections of one-dimensional non-Hermitian
//! tight-binding chains.

pub mod gbz;
pub mod intersect;
pub mod linalg;
pub mod model;
pub mod polyalg;
pub mod spectra;
pub mod topology;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
