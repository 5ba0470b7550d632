//! Matrix-free finite elements and iterative solvers for quasi-stationary
//! compressible Stokes flow coupled to a time-dependent advection-diffusion
//! energy equation on a blended annulus, with mantle-convection constitutive
//! models.
//!
//! Layout:
//! - [`geometry`]: annulus macro mesh, structured refinement, blending map
//! - [`femcore`]: Taylor-Hood spaces, quadrature, matrix-free operators
//! - [`constraints`]: Dirichlet elimination, free-slip and zero-mean projections
//! - [`krylov`]: CG, flexible GMRES, Chebyshev smoother, multigrid V-cycle
//! - [`stokes`]: Uzawa block preconditioners, Schur approximations, saddle solver
//! - [`energy`]: BDF2 + method-of-characteristics time integration
//! - [`physics`]: constitutive laws and nondimensionalisation
//! - [`app`]: configuration, run modes, output and checkpointing

pub mod constraints;
pub mod energy;
pub mod femcore;
pub mod geometry;
pub mod krylov;
pub mod physics;
pub mod stokes;

pub mod app;

pub use femcore::{FieldFunction, FunctionSpace, SpaceKind};
pub use geometry::{build_annulus_macro_mesh, BlendingMap, BoundaryTag, MacroMesh, RefinedMesh};
