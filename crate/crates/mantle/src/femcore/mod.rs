//! Function spaces, quadrature and matrix-free operator application.
//!
//! Velocity uses continuous degree-2 vector elements, pressure continuous
//! degree-1, temperature continuous degree-2 (Taylor-Hood pairing plus a
//! scalar space). All bilinear forms are applied element-by-element through
//! the blending pull-back without ever assembling a matrix; explicit
//! assembly exists only as a test oracle.

pub mod basis;
pub mod evaluate;
pub mod geomcache;
pub mod operators;
pub mod quadrature;
pub mod transfer;

use crate::geometry::RefinedMesh;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    P1Scalar,
    P2Scalar,
    P2Vector,
}

impl SpaceKind {
    pub fn components(&self) -> usize {
        match self {
            SpaceKind::P2Vector => 2,
            _ => 1,
        }
    }
}

/// A finite element space on one refinement level of a mesh.
#[derive(Clone)]
pub struct FunctionSpace {
    pub kind: SpaceKind,
    pub level: usize,
    pub mesh: Arc<RefinedMesh>,
}

impl FunctionSpace {
    pub fn new(mesh: Arc<RefinedMesh>, kind: SpaceKind, level: usize) -> Self {
        assert!(level <= mesh.max_level, "level beyond mesh refinement");
        FunctionSpace { kind, level, mesh }
    }

    /// Number of scalar coefficients.
    pub fn dim(&self) -> usize {
        let nodes = match self.kind {
            SpaceKind::P1Scalar => self.mesh.p1_node_count(self.level),
            _ => self.mesh.p2_node_count(self.level),
        };
        nodes * self.kind.components()
    }

    pub fn node_count(&self) -> usize {
        match self.kind {
            SpaceKind::P1Scalar => self.mesh.p1_node_count(self.level),
            _ => self.mesh.p2_node_count(self.level),
        }
    }

    /// Physical (blended) position of node `i`.
    pub fn node_position(&self, i: usize) -> [f64; 2] {
        match self.kind {
            SpaceKind::P1Scalar => self.mesh.lattice(self.level).blended[i],
            _ => self.mesh.p2_lattice(self.level).blended[i],
        }
    }
}

/// Coefficient vector tagged with its function space.
#[derive(Clone)]
pub struct FieldFunction {
    pub space: FunctionSpace,
    pub coeffs: Vec<f64>,
}

impl FieldFunction {
    pub fn zeros(space: FunctionSpace) -> Self {
        let n = space.dim();
        FieldFunction {
            space,
            coeffs: vec![0.0; n],
        }
    }

    /// Nodal interpolant of a scalar function of the physical point.
    pub fn interpolate_scalar(space: FunctionSpace, f: impl Fn([f64; 2]) -> f64) -> Self {
        assert!(space.kind != SpaceKind::P2Vector);
        let coeffs = (0..space.node_count())
            .map(|i| f(space.node_position(i)))
            .collect();
        FieldFunction { space, coeffs }
    }

    /// Nodal interpolant of a vector function of the physical point.
    pub fn interpolate_vector(space: FunctionSpace, f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        assert!(space.kind == SpaceKind::P2Vector);
        let mut coeffs = vec![0.0; space.dim()];
        for i in 0..space.node_count() {
            let v = f(space.node_position(i));
            coeffs[2 * i] = v[0];
            coeffs[2 * i + 1] = v[1];
        }
        FieldFunction { space, coeffs }
    }

    pub fn evaluate(&self, x: [f64; 2]) -> Option<f64> {
        match self.space.kind {
            SpaceKind::P1Scalar => {
                evaluate::evaluate_p1(&self.space.mesh, self.space.level, &self.coeffs, x)
            }
            SpaceKind::P2Scalar => {
                evaluate::evaluate_p2_scalar(&self.space.mesh, self.space.level, &self.coeffs, x)
            }
            SpaceKind::P2Vector => panic!("use evaluate_vector for vector fields"),
        }
    }

    pub fn evaluate_vector(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        assert!(self.space.kind == SpaceKind::P2Vector);
        evaluate::evaluate_p2_vector(&self.space.mesh, self.space.level, &self.coeffs, x)
    }
}

/// Viscosity realisation on one level.
///
/// Coarse levels evaluate the viscosity law at quadrature points using the
/// degree-2 temperature; fine levels interpolate precomputed vertex values
/// as a degree-1 field.
#[derive(Clone)]
pub enum LevelViscosity {
    Quadrature {
        eta: Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>,
        /// Degree-2 temperature coefficients on this level.
        temperature: Arc<Vec<f64>>,
    },
    NodalP1(Arc<Vec<f64>>),
    Constant(f64),
}

impl LevelViscosity {
    pub fn constant(value: f64) -> Self {
        LevelViscosity::Constant(value)
    }
}
