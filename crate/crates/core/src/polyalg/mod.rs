//! Complex polynomial arithmetic: dense univariate and sparse multivariate
//! polynomials, simultaneous root finding, Sylvester matrices and resultants.

mod multipoly;
mod resultant;
mod roots;
mod unipoly;

pub use multipoly::MultiPoly;
pub use resultant::{
    interpolate, resultant, resultant_degree_bounds, resultant_formal, resultant_scalar,
    resultant_with_radii,
    sylvester, SylvesterEntry, SylvesterMatrix,
};
pub use roots::{merge_clusters, phase_0_2pi, poly_roots, sort_roots};
pub use unipoly::UniPoly;

use num_complex::Complex64;
use thiserror::Error;

/// Coefficients below this fraction of the largest one are treated as zero.
pub const COEFF_ZERO_TOL: f64 = 1e-12;

/// Roots closer than this (relative to `max(1, |r|)`) form a multiple-root cluster.
pub const ROOT_CLUSTER_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("polynomial is identically zero")]
    ZeroPolynomial,
    #[error("polynomial has degree zero in the requested variable")]
    DegreeZero,
    #[error("root iteration did not converge (relative residual {residual:e})")]
    NonConvergence { best: Vec<Complex64>, residual: f64 },
}
