//! Special functions and quadrature primitives.
//!
//! Everything in here is a pure function of its arguments. Nodes, weights and
//! recurrences are recomputed on every call; callers that need a rule many
//! times keep the returned [`QuadratureRule`] around themselves.

mod bessel;
mod gauss;
mod legendre;
mod spline;

pub use bessel::{
    sph_bessel, sph_bessel_derivatives, sph_bessel_j_table, sph_bessel_y_table, BesselKind,
};
pub use gauss::{gauss_legendre, gauss_legendre_panels, QuadratureRule};
pub use legendre::{legendre_p, legendre_table};
pub use spline::SplineSet;

/// Highest angular momentum / polynomial degree the special functions accept.
pub const MAX_DEGREE: usize = 64;

/// Largest single Gauss-Legendre rule; longer intervals use panels.
pub const MAX_GL_ORDER: usize = 512;
