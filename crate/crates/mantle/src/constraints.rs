//! Essential constraints of the saddle-point system: Dirichlet velocity at
//! the surface, the nodal free-slip projection at the core-mantle boundary,
//! and the zero-mean pressure projection.

use crate::femcore::evaluate;
use crate::femcore::FieldFunction;
use crate::geometry::RefinedMesh;
use std::sync::Arc;

/// Prescribed boundary data for one solve.
pub struct BoundaryConditionSet {
    /// Tangential surface velocity as a function of the blended point.
    pub surface_velocity: Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>,
    /// Nondimensional surface temperature (T_surface / dT).
    pub t_surface: f64,
    /// Nondimensional CMB temperature (T_cmb / dT).
    pub t_cmb: f64,
}

impl BoundaryConditionSet {
    pub fn no_slip(t_surface: f64, t_cmb: f64) -> Self {
        BoundaryConditionSet {
            surface_velocity: Arc::new(|_| [0.0, 0.0]),
            t_surface,
            t_cmb,
        }
    }

    /// Full-length velocity vector holding the interpolated surface data at
    /// surface nodes and zero elsewhere.
    pub fn surface_extension(&self, mesh: &RefinedMesh, level: usize) -> Vec<f64> {
        let lat = mesh.p2_lattice(level);
        let mut e = vec![0.0; 2 * lat.node_count];
        for &n in &lat.surface_nodes {
            let x = lat.blended[n as usize];
            let v = (self.surface_velocity)(x);
            e[2 * n as usize] = v[0];
            e[2 * n as usize + 1] = v[1];
        }
        e
    }
}

/// Node sets and analytic normals realising the velocity constraints of one
/// refinement level: Dirichlet rows at the surface, free-slip rows at the CMB.
#[derive(Clone)]
pub struct VelocityConstraints {
    pub level: usize,
    pub surface_nodes: Vec<u32>,
    pub cmb_nodes: Vec<u32>,
    /// Outward unit normals x/|x| at the blended CMB nodes.
    pub cmb_normals: Vec<[f64; 2]>,
}

impl VelocityConstraints {
    pub fn build(mesh: &RefinedMesh, level: usize) -> Self {
        let lat = mesh.p2_lattice(level);
        let cmb_nodes = lat.cmb_nodes.clone();
        let cmb_normals = cmb_nodes
            .iter()
            .map(|&n| {
                let x = lat.blended[n as usize];
                let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
                [x[0] / r, x[1] / r]
            })
            .collect();
        VelocityConstraints {
            level,
            surface_nodes: lat.surface_nodes.clone(),
            cmb_nodes,
            cmb_normals,
        }
    }

    /// Removes the normal component at every CMB node: u <- u - (u.n) n.
    pub fn apply_freeslip(&self, u: &mut [f64]) {
        for (k, &node) in self.cmb_nodes.iter().enumerate() {
            let n = self.cmb_normals[k];
            let i = 2 * node as usize;
            let un = u[i] * n[0] + u[i + 1] * n[1];
            u[i] -= un * n[0];
            u[i + 1] -= un * n[1];
        }
    }

    /// Zeroes the Dirichlet (surface) rows.
    pub fn zero_surface(&self, u: &mut [f64]) {
        for &node in &self.surface_nodes {
            u[2 * node as usize] = 0.0;
            u[2 * node as usize + 1] = 0.0;
        }
    }

    /// Full velocity projection: Dirichlet rows zeroed, free-slip at the CMB.
    pub fn project(&self, u: &mut [f64]) {
        self.zero_surface(u);
        self.apply_freeslip(u);
    }

    /// Largest |u.n| over CMB nodes (free-slip violation measure).
    pub fn max_normal_component(&self, u: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (k, &node) in self.cmb_nodes.iter().enumerate() {
            let n = self.cmb_normals[k];
            let i = 2 * node as usize;
            worst = worst.max((u[i] * n[0] + u[i + 1] * n[1]).abs());
        }
        worst
    }
}

/// Subtracts the arithmetic mean of the coefficient vector from every entry.
pub fn apply_zero_mean(p: &mut [f64]) {
    let mean = p.iter().sum::<f64>() / p.len() as f64;
    for v in p.iter_mut() {
        *v -= mean;
    }
}

pub fn arithmetic_mean(p: &[f64]) -> f64 {
    p.iter().sum::<f64>() / p.len() as f64
}

/// Additive constant c_p with int (p + c_p) = 0 over the blended domain.
pub fn pressure_shift_constant(p: &FieldFunction) -> f64 {
    let area = evaluate::domain_area(&p.space.mesh, p.space.level);
    -evaluate::integrate(p) / area
}

/// Reduced right-hand side of the constrained saddle system: surface rows
/// are dropped (zeroed), the interpolated surface data is moved to the right
/// side through the operator columns, and both projections are applied.
pub fn eliminate_dirichlet(
    f_raw: &[f64],
    g_raw: &[f64],
    a_times_ext: &[f64],
    bbar_times_ext: &[f64],
    vc: &VelocityConstraints,
) -> (Vec<f64>, Vec<f64>) {
    let mut fu: Vec<f64> = f_raw
        .iter()
        .zip(a_times_ext)
        .map(|(f, a)| f - a)
        .collect();
    vc.zero_surface(&mut fu);
    vc.apply_freeslip(&mut fu);
    let mut fp: Vec<f64> = g_raw
        .iter()
        .zip(bbar_times_ext)
        .map(|(g, b)| g - b)
        .collect();
    apply_zero_mean(&mut fp);
    (fu, fp)
}
