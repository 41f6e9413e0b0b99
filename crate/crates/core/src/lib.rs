//! Volume distance to smooth strictly convex hypersurfaces.
//!
//! The volume distance `v(p)` is the smallest volume cut off from a convex
//! body by a hyperplane through `p`. This crate computes it together with
//! the normalized Hessian form `Q = (1/b)·∂²V/∂n²` of the minimizing
//! section, the Blaschke normal form of the boundary (metric, affine normal,
//! conormal, shape form) and the asymptotics of `Q` along centroid curves.

pub mod affine;
pub mod asympt;
pub mod error;
pub mod geometry;
pub mod poly;
pub mod quadrature;
pub mod section;
pub mod voldist;

pub use error::{Error, Result};
