//! Convex bodies, affine maps, plane frames and boundary jets.
//!
//! Orientation convention: surface normals point out of the body; graph
//! jets use the inner (convex-side) normal as their height axis.

mod affine_map;
mod body;
mod frame;
mod jet;
mod spec;

pub use affine_map::AffineMap;
pub use body::{AffineImage, Body, Ellipsoid, QuarticGraph, SURFACE_TOL};
pub use frame::{tangent_basis, transport_basis, PlaneFrame};
pub use jet::{graph_jet4, jet_in_frame, Jet4};
pub use spec::{AffineMapSpec, BodySpec};
