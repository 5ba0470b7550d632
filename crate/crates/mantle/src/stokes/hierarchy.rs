//! Per-level operator stacks: the two-tier viscosity realisation, the
//! constrained viscous block and its multigrid hierarchies, and the pressure
//! Poisson hierarchies of the weighted BFBT approximation.

use crate::constraints::{apply_zero_mean, VelocityConstraints};
use crate::femcore::operators::{EtaPower, PressureStiffnessOp, ViscousOp};
use crate::femcore::transfer::{inject_p2, p2_at_vertices};
use crate::femcore::LevelViscosity;
use crate::geometry::RefinedMesh;
use crate::krylov::{
    estimate_spectral_bound, ChebyshevConfig, ChebyshevSetup, LinearOp, MgLevel, Multigrid,
    StoppingRule, Transfer, VCycleConfig,
};
use crate::physics::ViscosityModel;
use std::sync::Arc;

/// Viscous block restricted to the constrained subspace: surface rows act as
/// identity, CMB rows carry the free-slip projection (P A P + (I - P)).
pub struct ConstrainedVelocityOp {
    pub inner: Arc<ViscousOp>,
    pub vc: Arc<VelocityConstraints>,
}

impl LinearOp for ConstrainedVelocityOp {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut xp = x.to_vec();
        self.vc.project(&mut xp);
        self.inner.apply(&xp, y);
        self.vc.project(y);
        // Identity on the complement: Dirichlet rows and normal components.
        for &node in &self.vc.surface_nodes {
            let i = 2 * node as usize;
            y[i] = x[i];
            y[i + 1] = x[i + 1];
        }
        for (k, &node) in self.vc.cmb_nodes.iter().enumerate() {
            let n = self.vc.cmb_normals[k];
            let i = 2 * node as usize;
            let un = x[i] * n[0] + x[i + 1] * n[1];
            y[i] += un * n[0];
            y[i + 1] += un * n[1];
        }
    }
}

/// Builds the per-level viscosity realisation from the finest-level
/// temperature: quadrature-point evaluation of the law up to
/// `viscosity_level`, a precomputed vertex (degree-1) field above it.
pub fn build_viscosity_hierarchy(
    mesh: &Arc<RefinedMesh>,
    min_level: usize,
    max_level: usize,
    viscosity_level: usize,
    temperature: &[f64],
    model: &ViscosityModel,
    use_surrogate: bool,
) -> Vec<LevelViscosity> {
    (min_level..=max_level)
        .map(|level| {
            let t_level = if level == max_level {
                temperature.to_vec()
            } else {
                inject_p2(mesh, max_level, level, temperature, 1)
            };
            if level <= viscosity_level {
                let m = model.clone();
                let eta: Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync> = if use_surrogate {
                    Arc::new(move |x, t| m.eta_surrogate(x, t))
                } else {
                    Arc::new(move |x, t| m.eta(x, t))
                };
                LevelViscosity::Quadrature {
                    eta,
                    temperature: Arc::new(t_level),
                }
            } else {
                let t_vertices = p2_at_vertices(mesh, level, &t_level);
                let lat = mesh.lattice(level);
                let vals: Vec<f64> = t_vertices
                    .iter()
                    .enumerate()
                    .map(|(i, &t)| model.eta(lat.blended[i], t))
                    .collect();
                LevelViscosity::NodalP1(Arc::new(vals))
            }
        })
        .collect()
}

/// Transfer adapter over the mesh-cached prolongation matrices.
pub struct MeshTransfer {
    pub mesh: Arc<RefinedMesh>,
    pub coarse_level: usize,
    pub quadratic: bool,
    pub comps: usize,
}

impl Transfer for MeshTransfer {
    fn prolong_add(&self, coarse: &[f64], fine: &mut [f64]) {
        if self.quadratic {
            self.mesh
                .p2_transfer(self.coarse_level)
                .prolong_add(coarse, fine, self.comps);
        } else {
            self.mesh
                .p1_transfer(self.coarse_level)
                .prolong_add(coarse, fine, self.comps);
        }
    }

    fn restrict(&self, fine: &[f64], coarse: &mut [f64]) {
        if self.quadratic {
            self.mesh
                .p2_transfer(self.coarse_level)
                .restrict(fine, coarse, self.comps);
        } else {
            self.mesh
                .p1_transfer(self.coarse_level)
                .restrict(fine, coarse, self.comps);
        }
    }
}

/// The viscous-block stack shared by the outer solver, the A-block conjugate
/// gradient preconditioner and the cheap BFBT V-cycle.
pub struct VelocityStack {
    pub min_level: usize,
    pub max_level: usize,
    pub ops: Vec<Arc<ConstrainedVelocityOp>>,
    pub constraints: Vec<Arc<VelocityConstraints>>,
    pub inv_diags: Vec<Vec<f64>>,
    pub spectral_bounds: Vec<f64>,
}

impl VelocityStack {
    pub fn build(
        mesh: &Arc<RefinedMesh>,
        min_level: usize,
        max_level: usize,
        viscosity: &[LevelViscosity],
        power_iterations: usize,
    ) -> Self {
        let mut ops = Vec::new();
        let mut constraints = Vec::new();
        let mut inv_diags = Vec::new();
        let mut spectral_bounds = Vec::new();
        for level in min_level..=max_level {
            let vc = Arc::new(VelocityConstraints::build(mesh, level));
            let raw = Arc::new(ViscousOp {
                mesh: mesh.clone(),
                level,
                viscosity: viscosity[level - min_level].clone(),
            });
            // Free-slip rows are excluded from the diagonal on purpose.
            let diag = raw.diagonal();
            let inv_diag: Vec<f64> = diag.iter().map(|&d| 1.0 / d).collect();
            let op = Arc::new(ConstrainedVelocityOp {
                inner: raw,
                vc: vc.clone(),
            });
            let vc_proj = vc.clone();
            let project = move |v: &mut [f64]| vc_proj.project(v);
            let lambda = estimate_spectral_bound(
                op.as_ref(),
                &inv_diag,
                Some(&project),
                power_iterations,
            )
            .expect("viscous block has nonzero action");
            ops.push(op);
            constraints.push(vc);
            inv_diags.push(inv_diag);
            spectral_bounds.push(lambda);
        }
        VelocityStack {
            min_level,
            max_level,
            ops,
            constraints,
            inv_diags,
            spectral_bounds,
        }
    }

    pub fn top_op(&self) -> &Arc<ConstrainedVelocityOp> {
        self.ops.last().unwrap()
    }

    pub fn top_constraints(&self) -> &Arc<VelocityConstraints> {
        self.constraints.last().unwrap()
    }

    /// Multigrid hierarchy with the given smoother polynomial setup.
    pub fn multigrid(
        &self,
        mesh: &Arc<RefinedMesh>,
        degree: usize,
        smooth_steps: usize,
        tol_coarse: f64,
        max_coarse_iter: usize,
    ) -> Multigrid {
        let mut levels = Vec::new();
        for (k, op) in self.ops.iter().enumerate() {
            let vc = self.constraints[k].clone();
            let project: Arc<dyn Fn(&mut [f64]) + Send + Sync> =
                Arc::new(move |v: &mut [f64]| vc.project(v));
            levels.push(MgLevel {
                op: op.clone() as Arc<dyn LinearOp + Send + Sync>,
                smoother: ChebyshevSetup {
                    config: ChebyshevConfig::from_estimate(degree, self.spectral_bounds[k]),
                    inv_diag: self.inv_diags[k].clone(),
                },
                project: Some(project),
            });
        }
        let transfers: Vec<Box<dyn Transfer>> = (self.min_level..self.max_level)
            .map(|cl| {
                Box::new(MeshTransfer {
                    mesh: mesh.clone(),
                    coarse_level: cl,
                    quadratic: true,
                    comps: 2,
                }) as Box<dyn Transfer>
            })
            .collect();
        Multigrid {
            levels,
            transfers,
            config: VCycleConfig {
                smooth_steps,
                coarse_stop: StoppingRule::relative(tol_coarse, max_coarse_iter),
            },
        }
    }
}

/// Pressure Poisson hierarchy (pure Neumann, zero-mean projected) for one
/// side of the weighted BFBT approximation.
pub fn pressure_poisson_multigrid(
    mesh: &Arc<RefinedMesh>,
    min_level: usize,
    max_level: usize,
    viscosity: &[LevelViscosity],
    surface_scale: f64,
    degree: usize,
    smooth_steps: usize,
    tol_coarse: f64,
    max_coarse_iter: usize,
    power_iterations: usize,
) -> Multigrid {
    let mut levels = Vec::new();
    for level in min_level..=max_level {
        let op = Arc::new(PressureStiffnessOp::new(
            mesh.clone(),
            level,
            viscosity[level - min_level].clone(),
            EtaPower::InverseSqrt,
            surface_scale,
        ));
        let diag = op.diagonal();
        let inv_diag: Vec<f64> = diag.iter().map(|&d| 1.0 / d).collect();
        let project: Arc<dyn Fn(&mut [f64]) + Send + Sync> =
            Arc::new(|v: &mut [f64]| apply_zero_mean(v));
        let proj_fn = |v: &mut [f64]| apply_zero_mean(v);
        let lambda =
            estimate_spectral_bound(op.as_ref(), &inv_diag, Some(&proj_fn), power_iterations)
                .expect("poisson operator has nonzero action");
        levels.push(MgLevel {
            op: op as Arc<dyn LinearOp + Send + Sync>,
            smoother: ChebyshevSetup {
                config: ChebyshevConfig::from_estimate(degree, lambda),
                inv_diag,
            },
            project: Some(project),
        });
    }
    let transfers: Vec<Box<dyn Transfer>> = (min_level..max_level)
        .map(|cl| {
            Box::new(MeshTransfer {
                mesh: mesh.clone(),
                coarse_level: cl,
                quadratic: false,
                comps: 1,
            }) as Box<dyn Transfer>
        })
        .collect();
    Multigrid {
        levels,
        transfers,
        config: VCycleConfig {
            smooth_steps,
            coarse_stop: StoppingRule::relative(tol_coarse, max_coarse_iter),
        },
    }
}
