//! Annulus meshing: macro grid, structured refinement and the blending map.
//!
//! The domain is a hollow annulus r_cmb <= |x| <= r_surface. It is meshed by
//! a hollow regular polygon split into trapezoid layers, each trapezoid split
//! into two triangles (the macro mesh). Each macro triangle is refined
//! uniformly (red refinement) into 4^L congruent sub-triangles. The refined,
//! piecewise-straight mesh covers a polygonal annulus; a blending map carries
//! it onto the exact circular annulus. Curvature enters the discretisation
//! only through the blending Jacobian in pull-back integrals.

mod blending;
mod mesh;
mod refine;

pub use blending::BlendingMap;
pub use mesh::{build_annulus_macro_mesh, BoundaryTag, MacroMesh};
pub use refine::{ElementId, Lattice, RefinedMesh};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid annulus geometry: {0}")]
    InvalidGeometry(String),
    #[error("point ({0}, {1}) lies outside the meshed domain")]
    OutsideDomain(f64, f64),
}
