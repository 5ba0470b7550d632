//! Matrix-free application of the bilinear forms.
//!
//! Momentum block (deviatoric viscous form), divergence and density
//! couplings, gradient, viscosity-scaled masses and stiffnesses, and the
//! time-discrete energy operator. Every `apply` loops over elements,
//! evaluates the pulled-back integrand at quadrature points and scatters
//! element contributions in deterministic element order, so results are
//! bitwise reproducible for any thread count.

use super::basis::{self, BasisTables, P1_GRADS};
use super::quadrature::RuleKind;
use super::LevelViscosity;
use crate::geometry::RefinedMesh;
use crate::krylov::LinearOp;
use rayon::prelude::*;
use std::sync::Arc;

pub type ScalarFn = dyn Fn([f64; 2]) -> f64 + Send + Sync;
pub type VectorFn = dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync;
pub type EtaFn = dyn Fn([f64; 2], f64) -> f64 + Send + Sync;

/// Power of the viscosity entering a scaled mass/stiffness coefficient.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EtaPower {
    One,
    Sqrt,
    Inverse,
    InverseSqrt,
}

#[inline]
fn coeff(power: EtaPower, eta: f64) -> f64 {
    match power {
        EtaPower::One => 1.0,
        EtaPower::Sqrt => eta.sqrt(),
        EtaPower::Inverse => 1.0 / eta,
        EtaPower::InverseSqrt => 1.0 / eta.sqrt(),
    }
}

/// Per-element viscosity evaluation context.
enum EtaLocals<'a> {
    Quadrature([f64; 6], &'a EtaFn),
    P1([f64; 3]),
    Constant(f64),
}

impl LevelViscosity {
    fn locals<'a>(&'a self, p1: &[u32; 3], p2: &[u32; 6]) -> EtaLocals<'a> {
        match self {
            LevelViscosity::Quadrature { eta, temperature } => {
                let mut t = [0.0; 6];
                for k in 0..6 {
                    t[k] = temperature[p2[k] as usize];
                }
                EtaLocals::Quadrature(t, eta.as_ref())
            }
            LevelViscosity::NodalP1(vals) => {
                let mut v = [0.0; 3];
                for k in 0..3 {
                    v[k] = vals[p1[k] as usize];
                }
                EtaLocals::P1(v)
            }
            LevelViscosity::Constant(c) => EtaLocals::Constant(*c),
        }
    }
}

impl EtaLocals<'_> {
    #[inline]
    fn at(&self, bt: &BasisTables, q: usize, x: [f64; 2]) -> f64 {
        match self {
            EtaLocals::Quadrature(t, eta) => {
                let phi = &bt.p2_vals[q];
                let mut tq = 0.0;
                for k in 0..6 {
                    tq += t[k] * phi[k];
                }
                eta(x, tq)
            }
            EtaLocals::P1(v) => {
                let psi = &bt.p1_vals[q];
                v[0] * psi[0] + v[1] * psi[1] + v[2] * psi[2]
            }
            EtaLocals::Constant(c) => *c,
        }
    }
}

#[inline]
fn phys_grad(jt: &[f64; 4], g: &[f64; 2]) -> [f64; 2] {
    [jt[0] * g[0] + jt[1] * g[1], jt[2] * g[0] + jt[3] * g[1]]
}

fn par_element_buffer<F>(n_elem: usize, out_len: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let mut buf = vec![0.0; n_elem * out_len];
    buf.par_chunks_mut(out_len)
        .enumerate()
        .for_each(|(e, out)| f(e, out));
    buf
}

fn scatter_vec2(y: &mut [f64], ids: &[[u32; 6]], buf: &[f64]) {
    y.fill(0.0);
    for (e, el) in ids.iter().enumerate() {
        let b = &buf[e * 12..(e + 1) * 12];
        for k in 0..6 {
            let g = el[k] as usize;
            y[2 * g] += b[2 * k];
            y[2 * g + 1] += b[2 * k + 1];
        }
    }
}

fn scatter_scalar6(y: &mut [f64], ids: &[[u32; 6]], buf: &[f64]) {
    y.fill(0.0);
    for (e, el) in ids.iter().enumerate() {
        let b = &buf[e * 6..(e + 1) * 6];
        for k in 0..6 {
            y[el[k] as usize] += b[k];
        }
    }
}

fn scatter_scalar3(y: &mut [f64], ids: &[[u32; 3]], buf: &[f64]) {
    y.fill(0.0);
    for (e, el) in ids.iter().enumerate() {
        let b = &buf[e * 3..(e + 1) * 3];
        for k in 0..3 {
            y[el[k] as usize] += b[k];
        }
    }
}

/// Elements whose closure touches the surface boundary (the set D_eta).
pub fn surface_element_mask(mesh: &RefinedMesh, level: usize) -> Vec<bool> {
    (0..mesh.element_count(level))
        .map(|e| mesh.element_touches_surface(level, e))
        .collect()
}

// ---------------------------------------------------------------------------
// Viscous block A: 2 eta deviatoric(sym grad u) : deviatoric(sym grad v)
// ---------------------------------------------------------------------------

pub struct ViscousOp {
    pub mesh: Arc<RefinedMesh>,
    pub level: usize,
    pub viscosity: LevelViscosity,
}

impl ViscousOp {
    pub fn diagonal(&self) -> Vec<f64> {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree6);
        let bt = basis::tables(RuleKind::Degree6);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let p1 = self.mesh.p1_element_nodes(self.level);
        let nq = geo.n_qp;
        let buf = par_element_buffer(p2.len(), 12, |e, out| {
            let eta_loc = self.viscosity.locals(&p1[e], &p2[e]);
            for q in 0..nq {
                let (_, xq, jt, w) = geo.at(e, q);
                let eta = eta_loc.at(bt, q, *xq);
                for k in 0..6 {
                    let g = phys_grad(jt, &bt.p2_grads[q][k]);
                    let d = eta * w * (g[0] * g[0] + g[1] * g[1]);
                    out[2 * k] += d;
                    out[2 * k + 1] += d;
                }
            }
        });
        let mut y = vec![0.0; 2 * self.mesh.p2_node_count(self.level)];
        scatter_vec2(&mut y, p2, &buf);
        y
    }
}

impl LinearOp for ViscousOp {
    fn dim(&self) -> usize {
        2 * self.mesh.p2_node_count(self.level)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree6);
        let bt = basis::tables(RuleKind::Degree6);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let p1 = self.mesh.p1_element_nodes(self.level);
        let nq = geo.n_qp;
        let buf = par_element_buffer(p2.len(), 12, |e, out| {
            let ids = &p2[e];
            let mut ux = [0.0; 6];
            let mut uy = [0.0; 6];
            for k in 0..6 {
                ux[k] = x[2 * ids[k] as usize];
                uy[k] = x[2 * ids[k] as usize + 1];
            }
            let eta_loc = self.viscosity.locals(&p1[e], ids);
            let mut gx = [[0.0f64; 2]; 6];
            for q in 0..nq {
                let (_, xq, jt, w) = geo.at(e, q);
                let mut du = [[0.0f64; 2]; 2];
                for k in 0..6 {
                    let g = phys_grad(jt, &bt.p2_grads[q][k]);
                    gx[k] = g;
                    du[0][0] += ux[k] * g[0];
                    du[0][1] += ux[k] * g[1];
                    du[1][0] += uy[k] * g[0];
                    du[1][1] += uy[k] * g[1];
                }
                let div = du[0][0] + du[1][1];
                let e00 = du[0][0] - 0.5 * div;
                let e11 = du[1][1] - 0.5 * div;
                let e01 = 0.5 * (du[0][1] + du[1][0]);
                let eta = eta_loc.at(bt, q, *xq);
                let s = 2.0 * eta * w;
                let (s00, s01, s11) = (s * e00, s * e01, s * e11);
                for k in 0..6 {
                    out[2 * k] += s00 * gx[k][0] + s01 * gx[k][1];
                    out[2 * k + 1] += s01 * gx[k][0] + s11 * gx[k][1];
                }
            }
        });
        scatter_vec2(y, p2, &buf);
    }
}

// ---------------------------------------------------------------------------
// Divergence-type couplings velocity -> pressure
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DivKind {
    /// -(div u, psi)
    Divergence,
    /// -(grad ln rho . u, psi)
    DensityGradient,
    /// Both terms (the compressible mass-balance row).
    Full,
}

pub struct DivOp {
    pub mesh: Arc<RefinedMesh>,
    pub level: usize,
    pub kind: DivKind,
    pub grad_ln_density: Option<Arc<VectorFn>>,
}

impl DivOp {
    pub fn dim_in(&self) -> usize {
        2 * self.mesh.p2_node_count(self.level)
    }

    pub fn dim_out(&self) -> usize {
        self.mesh.p1_node_count(self.level)
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree4);
        let bt = basis::tables(RuleKind::Degree4);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let p1 = self.mesh.p1_element_nodes(self.level);
        let nq = geo.n_qp;
        let with_div = self.kind != DivKind::DensityGradient;
        let with_rho = self.kind != DivKind::Divergence;
        let buf = par_element_buffer(p2.len(), 3, |e, out| {
            let ids = &p2[e];
            let mut ux = [0.0; 6];
            let mut uy = [0.0; 6];
            for k in 0..6 {
                ux[k] = u[2 * ids[k] as usize];
                uy[k] = u[2 * ids[k] as usize + 1];
            }
            for q in 0..nq {
                let (_, xq, jt, w) = geo.at(e, q);
                let mut div = 0.0;
                let mut uq = [0.0; 2];
                for k in 0..6 {
                    let g = phys_grad(jt, &bt.p2_grads[q][k]);
                    div += ux[k] * g[0] + uy[k] * g[1];
                    let phi = bt.p2_vals[q][k];
                    uq[0] += ux[k] * phi;
                    uq[1] += uy[k] * phi;
                }
                let mut val = 0.0;
                if with_div {
                    val -= div;
                }
                if with_rho {
                    let glr = self
                        .grad_ln_density
                        .as_ref()
                        .expect("density gradient required")(*xq);
                    val -= glr[0] * uq[0] + glr[1] * uq[1];
                }
                let s = w * val;
                for k in 0..3 {
                    out[k] += s * bt.p1_vals[q][k];
                }
            }
        });
        let mut y = vec![0.0; self.dim_out()];
        scatter_scalar3(&mut y, p1, &buf);
        y
    }
}

/// Pressure gradient B^T: -(p, div v). Stays the plain transpose of the
/// divergence even when the mass-balance row carries the density term.
pub struct GradOp {
    pub mesh: Arc<RefinedMesh>,
    pub level: usize,
}

impl GradOp {
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree4);
        let bt = basis::tables(RuleKind::Degree4);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let p1 = self.mesh.p1_element_nodes(self.level);
        let nq = geo.n_qp;
        let buf = par_element_buffer(p2.len(), 12, |e, out| {
            let pe = &p1[e];
            let pl = [
                p[pe[0] as usize],
                p[pe[1] as usize],
                p[pe[2] as usize],
            ];
            for q in 0..nq {
                let (_, _, jt, w) = geo.at(e, q);
                let psi = &bt.p1_vals[q];
                let pq = pl[0] * psi[0] + pl[1] * psi[1] + pl[2] * psi[2];
                let s = -w * pq;
                for k in 0..6 {
                    let g = phys_grad(jt, &bt.p2_grads[q][k]);
                    out[2 * k] += s * g[0];
                    out[2 * k + 1] += s * g[1];
                }
            }
        });
        let mut y = vec![0.0; 2 * self.mesh.p2_node_count(self.level)];
        scatter_vec2(&mut y, p2, &buf);
        y
    }
}

// ---------------------------------------------------------------------------
// Scaled masses and stiffnesses
// ---------------------------------------------------------------------------

/// Vector mass on the velocity space with coefficient eta^power; the
/// viscosity is rescaled by `surface_scale^2` on elements touching the
/// surface (the boundary-layer weighting of the BFBT approximations).
pub struct VectorMassOp {
    pub mesh: Arc<RefinedMesh>,
    pub level: usize,
    pub viscosity: LevelViscosity,
    pub power: EtaPower,
    pub surface_scale: f64,
    surface_mask: Vec<bool>,
}

impl VectorMassOp {
    pub fn new(
        mesh: Arc<RefinedMesh>,
        level: usize,
        viscosity: LevelViscosity,
        power: EtaPower,
        surface_scale: f64,
    ) -> Self {
        let surface_mask = if surface_scale != 1.0 {
            surface_element_mask(&mesh, level)
        } else {
            Vec::new()
        };
        VectorMassOp {
            mesh,
            level,
            viscosity,
            power,
            surface_scale,
            surface_mask,
        }
    }

    #[inline]
    fn scale2(&self, e: usize) -> f64 {
        if !self.surface_mask.is_empty() && self.surface_mask[e] {
            self.surface_scale * self.surface_scale
        } else {
            1.0
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree6);
        let bt = basis::tables(RuleKind::Degree6);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let p1 = self.mesh.p1_element_nodes(self.level);
        let buf = par_element_buffer(p2.len(), 12, |e, out| {
            let eta_loc = self.viscosity.locals(&p1[e], &p2[e]);
            for q in 0..geo.n_qp {
                let (_, xq, _, w) = geo.at(e, q);
                let c = coeff(self.power, self.scale2(e) * eta_loc.at(bt, q, *xq));
                for k in 0..6 {
                    let d = w * c * bt.p2_vals[q][k] * bt.p2_vals[q][k];
                    out[2 * k] += d;
                    out[2 * k + 1] += d;
                }
            }
        });
        let mut y = vec![0.0; 2 * self.mesh.p2_node_count(self.level)];
        scatter_vec2(&mut y, p2, &buf);
        y
    }
}

impl LinearOp for VectorMassOp {
    fn dim(&self) -> usize {
        2 * self.mesh.p2_node_count(self.level)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree6);
        let bt = basis::tables(RuleKind::Degree6);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let p1 = self.mesh.p1_element_nodes(self.level);
        let buf = par_element_buffer(p2.len(), 12, |e, out| {
            let ids = &p2[e];
            let mut ux = [0.0; 6];
            let mut uy = [0.0; 6];
            for k in 0..6 {
                ux[k] = x[2 * ids[k] as usize];
                uy[k] = x[2 * ids[k] as usize + 1];
            }
            let eta_loc = self.viscosity.locals(&p1[e], ids);
            for q in 0..geo.n_qp {
                let (_, xq, _, w) = geo.at(e, q);
                let phi = &bt.p2_vals[q];
                let mut uq = [0.0; 2];
                for k in 0..6 {
                    uq[0] += ux[k] * phi[k];
                    uq[1] += uy[k] * phi[k];
                }
                let c = w * coeff(self.power, self.scale2(e) * eta_loc.at(bt, q, *xq));
                for k in 0..6 {
                    out[2 * k] += c * uq[0] * phi[k];
                    out[2 * k + 1] += c * uq[1] * phi[k];
                }
            }
        });
        scatter_vec2(y, p2, &buf);
    }
}

/// Scalar mass on the pressure space with coefficient eta^power.
pub struct PressureMassOp {
    pub mesh: Arc<RefinedMesh>,
    pub level: usize,
    pub viscosity: LevelViscosity,
    pub power: EtaPower,
}

impl PressureMassOp {
    pub fn diagonal(&self) -> Vec<f64> {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree6);
        let bt = basis::tables(RuleKind::Degree6);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let p1 = self.mesh.p1_element_nodes(self.level);
        let buf = par_element_buffer(p1.len(), 3, |e, out| {
            let eta_loc = self.viscosity.locals(&p1[e], &p2[e]);
            for q in 0..geo.n_qp {
                let (_, xq, _, w) = geo.at(e, q);
                let c = w * coeff(self.power, eta_loc.at(bt, q, *xq));
                for k in 0..3 {
                    out[k] += c * bt.p1_vals[q][k] * bt.p1_vals[q][k];
                }
            }
        });
        let mut y = vec![0.0; self.mesh.p1_node_count(self.level)];
        scatter_scalar3(&mut y, p1, &buf);
        y
    }
}

impl LinearOp for PressureMassOp {
    fn dim(&self) -> usize {
        self.mesh.p1_node_count(self.level)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree6);
        let bt = basis::tables(RuleKind::Degree6);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let p1 = self.mesh.p1_element_nodes(self.level);
        let buf = par_element_buffer(p1.len(), 3, |e, out| {
            let pe = &p1[e];
            let pl = [
                x[pe[0] as usize],
                x[pe[1] as usize],
                x[pe[2] as usize],
            ];
            let eta_loc = self.viscosity.locals(pe, &p2[e]);
            for q in 0..geo.n_qp {
                let (_, xq, _, w) = geo.at(e, q);
                let psi = &bt.p1_vals[q];
                let pq = pl[0] * psi[0] + pl[1] * psi[1] + pl[2] * psi[2];
                let c = w * coeff(self.power, eta_loc.at(bt, q, *xq)) * pq;
                for k in 0..3 {
                    out[k] += c * psi[k];
                }
            }
        });
        scatter_scalar3(y, p1, &buf);
    }
}

/// Scalar stiffness on the pressure space with coefficient eta^power
/// (pure-Neumann Poisson operator of the weighted BFBT approximation).
pub struct PressureStiffnessOp {
    pub mesh: Arc<RefinedMesh>,
    pub level: usize,
    pub viscosity: LevelViscosity,
    pub power: EtaPower,
    pub surface_scale: f64,
    surface_mask: Vec<bool>,
}

impl PressureStiffnessOp {
    pub fn new(
        mesh: Arc<RefinedMesh>,
        level: usize,
        viscosity: LevelViscosity,
        power: EtaPower,
        surface_scale: f64,
    ) -> Self {
        let surface_mask = if surface_scale != 1.0 {
            surface_element_mask(&mesh, level)
        } else {
            Vec::new()
        };
        PressureStiffnessOp {
            mesh,
            level,
            viscosity,
            power,
            surface_scale,
            surface_mask,
        }
    }

    #[inline]
    fn scale2(&self, e: usize) -> f64 {
        if !self.surface_mask.is_empty() && self.surface_mask[e] {
            self.surface_scale * self.surface_scale
        } else {
            1.0
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree4);
        let bt = basis::tables(RuleKind::Degree4);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let p1 = self.mesh.p1_element_nodes(self.level);
        let buf = par_element_buffer(p1.len(), 3, |e, out| {
            let eta_loc = self.viscosity.locals(&p1[e], &p2[e]);
            for q in 0..geo.n_qp {
                let (_, xq, jt, w) = geo.at(e, q);
                let c = w * coeff(self.power, self.scale2(e) * eta_loc.at(bt, q, *xq));
                for k in 0..3 {
                    let g = phys_grad(jt, &P1_GRADS[k]);
                    out[k] += c * (g[0] * g[0] + g[1] * g[1]);
                }
            }
        });
        let mut y = vec![0.0; self.mesh.p1_node_count(self.level)];
        scatter_scalar3(&mut y, p1, &buf);
        y
    }
}

impl LinearOp for PressureStiffnessOp {
    fn dim(&self) -> usize {
        self.mesh.p1_node_count(self.level)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree4);
        let bt = basis::tables(RuleKind::Degree4);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let p1 = self.mesh.p1_element_nodes(self.level);
        let buf = par_element_buffer(p1.len(), 3, |e, out| {
            let pe = &p1[e];
            let pl = [
                x[pe[0] as usize],
                x[pe[1] as usize],
                x[pe[2] as usize],
            ];
            let eta_loc = self.viscosity.locals(pe, &p2[e]);
            for q in 0..geo.n_qp {
                let (_, xq, jt, w) = geo.at(e, q);
                let mut gp = [0.0; 2];
                let mut gk = [[0.0; 2]; 3];
                for k in 0..3 {
                    let g = phys_grad(jt, &P1_GRADS[k]);
                    gk[k] = g;
                    gp[0] += pl[k] * g[0];
                    gp[1] += pl[k] * g[1];
                }
                let c = w * coeff(self.power, self.scale2(e) * eta_loc.at(bt, q, *xq));
                for k in 0..3 {
                    out[k] += c * (gp[0] * gk[k][0] + gp[1] * gk[k][1]);
                }
            }
        });
        scatter_scalar3(y, p1, &buf);
    }
}

// ---------------------------------------------------------------------------
// Degree-2 scalar operators (temperature space)
// ---------------------------------------------------------------------------

/// Plain mass on the degree-2 scalar space.
pub struct ScalarMassOp {
    pub mesh: Arc<RefinedMesh>,
    pub level: usize,
}

impl ScalarMassOp {
    pub fn diagonal(&self) -> Vec<f64> {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree6);
        let bt = basis::tables(RuleKind::Degree6);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let buf = par_element_buffer(p2.len(), 6, |e, out| {
            for q in 0..geo.n_qp {
                let (_, _, _, w) = geo.at(e, q);
                for k in 0..6 {
                    out[k] += w * bt.p2_vals[q][k] * bt.p2_vals[q][k];
                }
            }
        });
        let mut y = vec![0.0; self.mesh.p2_node_count(self.level)];
        scatter_scalar6(&mut y, p2, &buf);
        y
    }
}

impl LinearOp for ScalarMassOp {
    fn dim(&self) -> usize {
        self.mesh.p2_node_count(self.level)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree6);
        let bt = basis::tables(RuleKind::Degree6);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let buf = par_element_buffer(p2.len(), 6, |e, out| {
            let ids = &p2[e];
            let mut tl = [0.0; 6];
            for k in 0..6 {
                tl[k] = x[ids[k] as usize];
            }
            for q in 0..geo.n_qp {
                let (_, _, _, w) = geo.at(e, q);
                let phi = &bt.p2_vals[q];
                let mut tq = 0.0;
                for k in 0..6 {
                    tq += tl[k] * phi[k];
                }
                for k in 0..6 {
                    out[k] += w * tq * phi[k];
                }
            }
        });
        scatter_scalar6(y, p2, &buf);
    }
}

/// Plain stiffness on the degree-2 scalar space (Poisson test problems).
pub struct ScalarStiffnessOp {
    pub mesh: Arc<RefinedMesh>,
    pub level: usize,
}

impl ScalarStiffnessOp {
    pub fn diagonal(&self) -> Vec<f64> {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree4);
        let bt = basis::tables(RuleKind::Degree4);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let buf = par_element_buffer(p2.len(), 6, |e, out| {
            for q in 0..geo.n_qp {
                let (_, _, jt, w) = geo.at(e, q);
                for k in 0..6 {
                    let g = phys_grad(jt, &bt.p2_grads[q][k]);
                    out[k] += w * (g[0] * g[0] + g[1] * g[1]);
                }
            }
        });
        let mut y = vec![0.0; self.mesh.p2_node_count(self.level)];
        scatter_scalar6(&mut y, p2, &buf);
        y
    }
}

impl LinearOp for ScalarStiffnessOp {
    fn dim(&self) -> usize {
        self.mesh.p2_node_count(self.level)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree4);
        let bt = basis::tables(RuleKind::Degree4);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let buf = par_element_buffer(p2.len(), 6, |e, out| {
            let ids = &p2[e];
            let mut tl = [0.0; 6];
            for k in 0..6 {
                tl[k] = x[ids[k] as usize];
            }
            for q in 0..geo.n_qp {
                let (_, _, jt, w) = geo.at(e, q);
                let mut gt = [0.0; 2];
                let mut gk = [[0.0; 2]; 6];
                for k in 0..6 {
                    let g = phys_grad(jt, &bt.p2_grads[q][k]);
                    gk[k] = g;
                    gt[0] += tl[k] * g[0];
                    gt[1] += tl[k] * g[1];
                }
                for k in 0..6 {
                    out[k] += w * (gt[0] * gk[k][0] + gt[1] * gk[k][1]);
                }
            }
        });
        scatter_scalar6(y, p2, &buf);
    }
}

/// Coefficients of the time-discrete energy operator.
#[derive(Clone, Copy, Debug)]
pub struct EnergyCoefficients {
    /// BDF coefficient of the new time level.
    pub s_new: f64,
    pub tau: f64,
    /// k / (Pe C^p).
    pub kappa: f64,
    /// Di alpha / C^p.
    pub adiabatic: f64,
    pub include_advection: bool,
    /// Apply only the symmetric mass + diffusion part (preconditioning).
    pub symmetric_part_only: bool,
}

/// Left-hand side of the discrete energy equation:
/// s_new (T, w) + tau [ (u* . grad T, w) + kappa (grad T, grad(w/rho))
///   - adiabatic (T (u* . g), w) ]
/// with grad(w/rho) = (1/rho)(grad w - w grad ln rho) and g = -x/|x|.
pub struct EnergyOp {
    pub mesh: Arc<RefinedMesh>,
    pub level: usize,
    pub coeffs: EnergyCoefficients,
    /// Extrapolated velocity (degree-2 vector); empty means zero.
    pub u_star: Arc<Vec<f64>>,
    pub inv_density: Arc<ScalarFn>,
    pub grad_ln_density: Arc<VectorFn>,
}

impl EnergyOp {
    pub fn diagonal(&self) -> Vec<f64> {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree6);
        let bt = basis::tables(RuleKind::Degree6);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let c = self.coeffs;
        let has_u = !self.u_star.is_empty();
        let buf = par_element_buffer(p2.len(), 6, |e, out| {
            let ids = &p2[e];
            let mut usx = [0.0; 6];
            let mut usy = [0.0; 6];
            if has_u {
                for k in 0..6 {
                    usx[k] = self.u_star[2 * ids[k] as usize];
                    usy[k] = self.u_star[2 * ids[k] as usize + 1];
                }
            }
            for q in 0..geo.n_qp {
                let (_, xq, jt, w) = geo.at(e, q);
                let phi = &bt.p2_vals[q];
                let inv_rho = (self.inv_density)(*xq);
                let glr = (self.grad_ln_density)(*xq);
                let r = (xq[0] * xq[0] + xq[1] * xq[1]).sqrt();
                let gvec = [-xq[0] / r, -xq[1] / r];
                let mut uq = [0.0; 2];
                if has_u {
                    for k in 0..6 {
                        uq[0] += usx[k] * phi[k];
                        uq[1] += usy[k] * phi[k];
                    }
                }
                for k in 0..6 {
                    let g = phys_grad(jt, &bt.p2_grads[q][k]);
                    let mut v = c.s_new * phi[k] * phi[k]
                        + c.tau * c.kappa * inv_rho * (g[0] * g[0] + g[1] * g[1]);
                    if !c.symmetric_part_only {
                        v -= c.tau
                            * c.kappa
                            * inv_rho
                            * phi[k]
                            * (g[0] * glr[0] + g[1] * glr[1]);
                        if c.include_advection && has_u {
                            v += c.tau * (uq[0] * g[0] + uq[1] * g[1]) * phi[k];
                        }
                        let ug = uq[0] * gvec[0] + uq[1] * gvec[1];
                        v -= c.tau * c.adiabatic * phi[k] * phi[k] * ug;
                    }
                    out[k] += w * v;
                }
            }
        });
        let mut y = vec![0.0; self.mesh.p2_node_count(self.level)];
        scatter_scalar6(&mut y, p2, &buf);
        y
    }
}

impl LinearOp for EnergyOp {
    fn dim(&self) -> usize {
        self.mesh.p2_node_count(self.level)
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let geo = self.mesh.geometry(self.level, RuleKind::Degree6);
        let bt = basis::tables(RuleKind::Degree6);
        let p2 = self.mesh.p2_element_nodes(self.level);
        let c = self.coeffs;
        let has_u = !self.u_star.is_empty() && !c.symmetric_part_only;
        let buf = par_element_buffer(p2.len(), 6, |e, out| {
            let ids = &p2[e];
            let mut tl = [0.0; 6];
            let mut usx = [0.0; 6];
            let mut usy = [0.0; 6];
            for k in 0..6 {
                tl[k] = x[ids[k] as usize];
                if has_u {
                    usx[k] = self.u_star[2 * ids[k] as usize];
                    usy[k] = self.u_star[2 * ids[k] as usize + 1];
                }
            }
            for q in 0..geo.n_qp {
                let (_, xq, jt, w) = geo.at(e, q);
                let phi = &bt.p2_vals[q];
                let inv_rho = (self.inv_density)(*xq);
                let mut tq = 0.0;
                let mut gt = [0.0; 2];
                let mut uq = [0.0; 2];
                let mut gk = [[0.0; 2]; 6];
                for k in 0..6 {
                    let g = phys_grad(jt, &bt.p2_grads[q][k]);
                    gk[k] = g;
                    tq += tl[k] * phi[k];
                    gt[0] += tl[k] * g[0];
                    gt[1] += tl[k] * g[1];
                    if has_u {
                        uq[0] += usx[k] * phi[k];
                        uq[1] += usy[k] * phi[k];
                    }
                }
                // Symmetric part: mass + (1/rho)-weighted diffusion.
                let mass = c.s_new * tq;
                let diff = c.tau * c.kappa * inv_rho;
                let mut extra = 0.0;
                if !c.symmetric_part_only {
                    let glr = (self.grad_ln_density)(*xq);
                    // -(kappa/rho) (grad T . grad ln rho) w
                    extra -= diff * (gt[0] * glr[0] + gt[1] * glr[1]);
                    if has_u {
                        if c.include_advection {
                            extra += c.tau * (uq[0] * gt[0] + uq[1] * gt[1]);
                        }
                        let r = (xq[0] * xq[0] + xq[1] * xq[1]).sqrt();
                        let ug = -(uq[0] * xq[0] + uq[1] * xq[1]) / r;
                        extra -= c.tau * c.adiabatic * tq * ug;
                    }
                }
                for k in 0..6 {
                    out[k] += w
                        * ((mass + extra) * phi[k] + diff * (gt[0] * gk[k][0] + gt[1] * gk[k][1]));
                }
            }
        });
        scatter_scalar6(y, p2, &buf);
    }
}

// ---------------------------------------------------------------------------
// Load vectors
// ---------------------------------------------------------------------------

/// Buoyancy load: coef * int rho(x) T_d (x/|x|) . v with T_d a degree-2
/// nodal field (coef = Ra alpha / Pe; the sign of g is already folded in).
pub fn buoyancy_load(
    mesh: &RefinedMesh,
    level: usize,
    t_dev: &[f64],
    density: impl Fn([f64; 2]) -> f64 + Sync,
    coef: f64,
) -> Vec<f64> {
    let geo = mesh.geometry(level, RuleKind::Degree6);
    let bt = basis::tables(RuleKind::Degree6);
    let p2 = mesh.p2_element_nodes(level);
    let buf = par_element_buffer(p2.len(), 12, |e, out| {
        let ids = &p2[e];
        let mut tl = [0.0; 6];
        for k in 0..6 {
            tl[k] = t_dev[ids[k] as usize];
        }
        for q in 0..geo.n_qp {
            let (_, xq, _, w) = geo.at(e, q);
            let phi = &bt.p2_vals[q];
            let mut tq = 0.0;
            for k in 0..6 {
                tq += tl[k] * phi[k];
            }
            let r = (xq[0] * xq[0] + xq[1] * xq[1]).sqrt();
            let s = w * coef * density(*xq) * tq / r;
            for k in 0..6 {
                out[2 * k] += s * xq[0] * phi[k];
                out[2 * k + 1] += s * xq[1] * phi[k];
            }
        }
    });
    let mut y = vec![0.0; 2 * mesh.p2_node_count(level)];
    scatter_vec2(&mut y, p2, &buf);
    y
}

/// General body-force load: int F(x) . v on the velocity space.
pub fn vector_body_load(
    mesh: &RefinedMesh,
    level: usize,
    f: impl Fn([f64; 2]) -> [f64; 2] + Sync,
) -> Vec<f64> {
    let geo = mesh.geometry(level, RuleKind::Degree6);
    let bt = basis::tables(RuleKind::Degree6);
    let p2 = mesh.p2_element_nodes(level);
    let buf = par_element_buffer(p2.len(), 12, |e, out| {
        for q in 0..geo.n_qp {
            let (_, xq, _, w) = geo.at(e, q);
            let fx = f(*xq);
            for k in 0..6 {
                let phi = bt.p2_vals[q][k];
                out[2 * k] += w * fx[0] * phi;
                out[2 * k + 1] += w * fx[1] * phi;
            }
        }
    });
    let mut y = vec![0.0; 2 * mesh.p2_node_count(level)];
    scatter_vec2(&mut y, p2, &buf);
    y
}

/// Scalar load int f(x) w on the degree-2 scalar space.
pub fn scalar_load(mesh: &RefinedMesh, level: usize, f: impl Fn([f64; 2]) -> f64 + Sync) -> Vec<f64> {
    let geo = mesh.geometry(level, RuleKind::Degree6);
    let bt = basis::tables(RuleKind::Degree6);
    let p2 = mesh.p2_element_nodes(level);
    let buf = par_element_buffer(p2.len(), 6, |e, out| {
        for q in 0..geo.n_qp {
            let (_, xq, _, w) = geo.at(e, q);
            let s = w * f(*xq);
            for k in 0..6 {
                out[k] += s * bt.p2_vals[q][k];
            }
        }
    });
    let mut y = vec![0.0; mesh.p2_node_count(level)];
    scatter_scalar6(&mut y, p2, &buf);
    y
}

/// Shear heating load: int prefactor(x) 2 eta(x, T*) dev(u*) : dev(u*) w,
/// optionally zeroed on elements touching the surface.
pub fn shear_heating_load(
    mesh: &RefinedMesh,
    level: usize,
    u_star: &[f64],
    t_star: &[f64],
    eta: impl Fn([f64; 2], f64) -> f64 + Sync,
    prefactor: impl Fn([f64; 2]) -> f64 + Sync,
    surface_cutoff: Option<&[bool]>,
) -> Vec<f64> {
    let geo = mesh.geometry(level, RuleKind::Degree6);
    let bt = basis::tables(RuleKind::Degree6);
    let p2 = mesh.p2_element_nodes(level);
    let buf = par_element_buffer(p2.len(), 6, |e, out| {
        if let Some(mask) = surface_cutoff {
            if mask[e] {
                return;
            }
        }
        let ids = &p2[e];
        let mut ux = [0.0; 6];
        let mut uy = [0.0; 6];
        let mut tl = [0.0; 6];
        for k in 0..6 {
            ux[k] = u_star[2 * ids[k] as usize];
            uy[k] = u_star[2 * ids[k] as usize + 1];
            tl[k] = t_star[ids[k] as usize];
        }
        for q in 0..geo.n_qp {
            let (_, xq, jt, w) = geo.at(e, q);
            let phi = &bt.p2_vals[q];
            let mut du = [[0.0f64; 2]; 2];
            let mut tq = 0.0;
            for k in 0..6 {
                let g = phys_grad(jt, &bt.p2_grads[q][k]);
                du[0][0] += ux[k] * g[0];
                du[0][1] += ux[k] * g[1];
                du[1][0] += uy[k] * g[0];
                du[1][1] += uy[k] * g[1];
                tq += tl[k] * phi[k];
            }
            let div = du[0][0] + du[1][1];
            let e00 = du[0][0] - 0.5 * div;
            let e11 = du[1][1] - 0.5 * div;
            let e01 = 0.5 * (du[0][1] + du[1][0]);
            let dev2 = e00 * e00 + e11 * e11 + 2.0 * e01 * e01;
            let s = w * prefactor(*xq) * 2.0 * eta(*xq, tq) * dev2;
            for k in 0..6 {
                out[k] += s * phi[k];
            }
        }
    });
    let mut y = vec![0.0; mesh.p2_node_count(level)];
    scatter_scalar6(&mut y, p2, &buf);
    y
}
