//! The saddle-point solver: flexible GMRES outer loop, Uzawa block
//! preconditioning with a multigrid viscous-block solve, and the three
//! Schur complement approximations.

pub mod hierarchy;
pub mod schur;
pub mod uzawa;

pub use schur::{InnerStats, SchurKind, SchurSolver};
pub use uzawa::{uzawa_step, UzawaKind, UzawaOps};

use crate::constraints::{
    apply_zero_mean, eliminate_dirichlet, pressure_shift_constant, BoundaryConditionSet,
    VelocityConstraints,
};
use crate::femcore::operators::{
    buoyancy_load, DivKind, DivOp, EtaPower, GradOp, PressureMassOp, VectorMassOp,
};
use crate::femcore::{FieldFunction, FunctionSpace, LevelViscosity, SpaceKind};
use crate::geometry::RefinedMesh;
use crate::krylov::{
    cg_solve, fgmres_solve, FgmresOptions, IterationReport, LinearOp, Multigrid, StoppingRule,
};
use crate::physics::PhysicalParams;
use hierarchy::{build_viscosity_hierarchy, ConstrainedVelocityOp, VelocityStack};
use std::cell::RefCell;
use std::sync::Arc;
use std::time::Instant;

/// Divergence operator used in the Uzawa pressure update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DivergenceChoice {
    Plain,
    WithDensity,
}

/// Solver tolerances and smoother parameters, plus the level bounds.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub max_level: usize,
    pub min_level: usize,
    /// Highest level on which the viscosity law is evaluated at quadrature
    /// points; above it a nodal degree-1 interpolant is used.
    pub viscosity_level: usize,
    /// Scaling of the approximate velocity-block inverse.
    pub sigma: f64,
    /// Scaling of the approximate Schur inverse.
    pub omega: f64,
    /// Relative tolerance of the velocity-block CG solve.
    pub tol_a: f64,
    /// Chebyshev pre-/post-smoothing steps of the velocity-block V-cycle.
    pub m_a: usize,
    /// Chebyshev degree of the velocity-block smoother.
    pub deg_a: usize,
    /// Relative tolerance of the commutator CG in the V-cycle BFBT.
    pub tol_vbfbt: f64,
    /// Relative tolerance of the scaled-mass Schur solve.
    pub tol_inv_mass: f64,
    /// Tolerance of the BFBT Poisson solves (relative or absolute,
    /// whichever applies first).
    pub tol_wbfbt: f64,
    /// Smoothing steps of the cheap BFBT V-cycle.
    pub m_v: usize,
    /// Chebyshev degree of the cheap BFBT V-cycle smoother.
    pub deg_v: usize,
    /// Relative tolerance of the coarse-grid CG solve.
    pub tol_coarse: f64,
    /// Absolute residual tolerance of the saddle-point solver.
    pub tol_saddle: f64,
    /// Optional relative saddle residual target (benchmarks).
    pub tol_saddle_rel: Option<f64>,
    /// Absolute tolerance of the temperature solver.
    pub tol_temperature: f64,
    /// Relative tolerance of the scaled vector-mass solves.
    pub tol_vector_mass: f64,
    /// Asymmetric BFBT viscosity rescaling near the surface.
    pub a_l: f64,
    pub a_r: f64,
    pub uzawa: UzawaKind,
    pub schur: SchurKind,
    pub divergence: DivergenceChoice,
    pub fgmres_restart: usize,
    pub max_outer: usize,
    pub max_inner: usize,
    pub power_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_level: 5,
            min_level: 0,
            viscosity_level: 1,
            sigma: 1.0,
            omega: 0.3,
            tol_a: 1e-2,
            m_a: 3,
            deg_a: 2,
            tol_vbfbt: 1e-1,
            tol_inv_mass: 1e-10,
            tol_wbfbt: 1e-10,
            m_v: 1,
            deg_v: 1,
            tol_coarse: 1e-2,
            tol_saddle: 1e-5,
            tol_saddle_rel: None,
            tol_temperature: 1e-10,
            tol_vector_mass: 1e-4,
            a_l: 1.0,
            a_r: 1.0,
            uzawa: UzawaKind::Symmetric,
            schur: SchurKind::VCycleBfbt,
            divergence: DivergenceChoice::WithDensity,
            fgmres_restart: 50,
            max_outer: 200,
            max_inner: 2000,
            power_iterations: 30,
        }
    }
}

/// Paired velocity/pressure coefficient vectors.
#[derive(Clone)]
pub struct BlockVector {
    pub u: FieldFunction,
    pub p: FieldFunction,
}

impl BlockVector {
    pub fn zeros(mesh: &Arc<RefinedMesh>, level: usize) -> Self {
        BlockVector {
            u: FieldFunction::zeros(FunctionSpace::new(mesh.clone(), SpaceKind::P2Vector, level)),
            p: FieldFunction::zeros(FunctionSpace::new(mesh.clone(), SpaceKind::P1Scalar, level)),
        }
    }
}

/// Per-outer-iteration log row.
#[derive(Clone, Copy, Debug)]
pub struct OuterIterationRow {
    pub iteration: usize,
    pub absolute_residual: f64,
    pub relative_residual: f64,
    pub seconds: f64,
}

pub struct StokesOutcome {
    pub solution: BlockVector,
    pub pressure_shift: f64,
    pub report: IterationReport,
    pub stats: InnerStats,
    pub rows: Vec<OuterIterationRow>,
}

/// The constrained saddle operator of the reduced system.
struct SaddleOp<'a> {
    a: &'a ConstrainedVelocityOp,
    bt: &'a GradOp,
    b_system: &'a DivOp,
    vc: &'a VelocityConstraints,
    n_u: usize,
    n_p: usize,
}

impl LinearOp for SaddleOp<'_> {
    fn dim(&self) -> usize {
        self.n_u + self.n_p
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let (u, p) = x.split_at(self.n_u);
        let mut up = u.to_vec();
        self.vc.project(&mut up);
        let mut pp = p.to_vec();
        apply_zero_mean(&mut pp);

        let mut yu = vec![0.0; self.n_u];
        self.a.apply(&up, &mut yu);
        let btp = self.bt.apply(&pp);
        for i in 0..self.n_u {
            yu[i] += btp[i];
        }
        self.vc.project(&mut yu);
        // Identity on the constrained complement.
        for &node in &self.vc.surface_nodes {
            let i = 2 * node as usize;
            yu[i] = u[i];
            yu[i + 1] = u[i + 1];
        }
        for (k, &node) in self.vc.cmb_nodes.iter().enumerate() {
            let n = self.vc.cmb_normals[k];
            let i = 2 * node as usize;
            let un = u[i] * n[0] + u[i + 1] * n[1];
            yu[i] += un * n[0];
            yu[i + 1] += un * n[1];
        }

        let mut yp = self.b_system.apply(&up);
        apply_zero_mean(&mut yp);
        let p_mean = p.iter().sum::<f64>() / p.len() as f64;
        for v in yp.iter_mut() {
            *v += p_mean;
        }

        y[..self.n_u].copy_from_slice(&yu);
        y[self.n_u..].copy_from_slice(&yp);
    }
}

/// Everything assembled for saddle-point solves at one time level.
pub struct StokesSolver {
    pub mesh: Arc<RefinedMesh>,
    pub cfg: SolverConfig,
    pub stack: VelocityStack,
    pub mg_a: Arc<Multigrid>,
    pub mg_cheap: Arc<Multigrid>,
    pub bt: GradOp,
    /// System mass-balance row (B or B + C depending on compressibility).
    pub b_system: DivOp,
    /// Divergence used in the Uzawa pressure update.
    pub b_precond: DivOp,
    pub schur: SchurSolver,
    pub compressible: bool,
    viscosity: Vec<LevelViscosity>,
}

impl StokesSolver {
    /// Builds operator stacks for the viscosity induced by `temperature`.
    pub fn build(
        mesh: &Arc<RefinedMesh>,
        cfg: &SolverConfig,
        params: &PhysicalParams,
        temperature: &[f64],
        compressible: bool,
        use_surrogate: bool,
    ) -> Self {
        let viscosity = build_viscosity_hierarchy(
            mesh,
            cfg.min_level,
            cfg.max_level,
            cfg.viscosity_level,
            temperature,
            &params.viscosity,
            use_surrogate,
        );
        Self::build_with_viscosity(mesh, cfg, params, viscosity, compressible)
    }

    pub fn build_with_viscosity(
        mesh: &Arc<RefinedMesh>,
        cfg: &SolverConfig,
        params: &PhysicalParams,
        viscosity: Vec<LevelViscosity>,
        compressible: bool,
    ) -> Self {
        let level = cfg.max_level;
        let stack = VelocityStack::build(
            mesh,
            cfg.min_level,
            cfg.max_level,
            &viscosity,
            cfg.power_iterations,
        );
        let mg_a =
            Arc::new(stack.multigrid(mesh, cfg.deg_a, cfg.m_a, cfg.tol_coarse, cfg.max_inner));
        let mg_cheap =
            Arc::new(stack.multigrid(mesh, cfg.deg_v, cfg.m_v, cfg.tol_coarse, cfg.max_inner));
        let bt = GradOp {
            mesh: mesh.clone(),
            level,
        };
        let grad_ln_rho: Arc<crate::femcore::operators::VectorFn> = {
            let p = params.clone();
            Arc::new(move |x| p.grad_ln_density(x))
        };
        let b_system = DivOp {
            mesh: mesh.clone(),
            level,
            kind: if compressible {
                DivKind::Full
            } else {
                DivKind::Divergence
            },
            grad_ln_density: if compressible {
                Some(grad_ln_rho.clone())
            } else {
                None
            },
        };
        let with_density = compressible && cfg.divergence == DivergenceChoice::WithDensity;
        let b_precond = DivOp {
            mesh: mesh.clone(),
            level,
            kind: if with_density {
                DivKind::Full
            } else {
                DivKind::Divergence
            },
            grad_ln_density: if with_density {
                Some(grad_ln_rho)
            } else {
                None
            },
        };
        let top_visc = viscosity[level - cfg.min_level].clone();
        let schur = build_schur(mesh, cfg, &stack, &viscosity, top_visc, &mg_cheap);
        StokesSolver {
            mesh: mesh.clone(),
            cfg: cfg.clone(),
            stack,
            mg_a,
            mg_cheap,
            bt,
            b_system,
            b_precond,
            schur,
            compressible,
            viscosity,
        }
    }

    pub fn level(&self) -> usize {
        self.cfg.max_level
    }

    pub fn constraints(&self) -> &Arc<VelocityConstraints> {
        self.stack.top_constraints()
    }

    pub fn viscosity_at(&self, level: usize) -> &LevelViscosity {
        &self.viscosity[level - self.cfg.min_level]
    }

    /// Velocity-block solve to the configured relative tolerance
    /// (CG preconditioned by one V-cycle).
    pub fn solve_a_block(&self, rhs: &[f64], stats: &RefCell<InnerStats>) -> Vec<f64> {
        let vc = self.constraints().clone();
        let proj = move |v: &mut [f64]| vc.project(v);
        let pre = |r: &[f64]| self.mg_a.precondition(r);
        let mut x = vec![0.0; rhs.len()];
        let rep = cg_solve(
            self.stack.top_op().as_ref(),
            rhs,
            &mut x,
            Some(&pre),
            Some(&proj),
            &StoppingRule::relative(self.cfg.tol_a, self.cfg.max_inner),
        );
        let mut s = stats.borrow_mut();
        s.a_block_solves += 1;
        s.a_block_iterations += rep.iterations;
        x
    }

    /// Momentum load from the temperature deviation plus Dirichlet
    /// elimination: the right-hand side of the reduced system.
    pub fn build_rhs(
        &self,
        params: &PhysicalParams,
        temperature: &[f64],
        bcs: &BoundaryConditionSet,
    ) -> (Vec<f64>, Vec<f64>) {
        let level = self.level();
        let lat = self.mesh.p2_lattice(level);
        // Nodal temperature deviation T - T^s (zero when T is the reference).
        let t_dev: Vec<f64> = temperature
            .iter()
            .enumerate()
            .map(|(i, &t)| t - params.reference_temperature(lat.blended[i]))
            .collect();
        let density = {
            let p = params.clone();
            move |x: [f64; 2]| p.density(x)
        };
        let coef = params.numbers.ra * params.alpha / params.numbers.pe;
        let f_raw = buoyancy_load(&self.mesh, level, &t_dev, &density, coef);
        let g_raw = vec![0.0; self.mesh.p1_node_count(level)];
        let ext = bcs.surface_extension(&self.mesh, level);
        let mut a_ext = vec![0.0; f_raw.len()];
        self.stack.top_op().inner.apply(&ext, &mut a_ext);
        let b_ext = self.b_system.apply(&ext);
        eliminate_dirichlet(&f_raw, &g_raw, &a_ext, &b_ext, self.constraints())
    }

    /// Full saddle-point solve; returns the solution with the surface data
    /// re-attached, the pressure shift constant, and the solve reports.
    pub fn solve(
        &self,
        params: &PhysicalParams,
        temperature: &[f64],
        bcs: &BoundaryConditionSet,
    ) -> StokesOutcome {
        let (fu, fp) = self.build_rhs(params, temperature, bcs);
        self.solve_with_rhs(&fu, &fp, bcs)
    }

    pub fn solve_with_rhs(
        &self,
        fu: &[f64],
        fp: &[f64],
        bcs: &BoundaryConditionSet,
    ) -> StokesOutcome {
        let level = self.level();
        let n_u = 2 * self.mesh.p2_node_count(level);
        let n_p = self.mesh.p1_node_count(level);
        let vc = self.constraints().clone();

        let saddle = SaddleOp {
            a: self.stack.top_op().as_ref(),
            bt: &self.bt,
            b_system: &self.b_system,
            vc: &vc,
            n_u,
            n_p,
        };

        let mut rhs = vec![0.0; n_u + n_p];
        rhs[..n_u].copy_from_slice(fu);
        rhs[n_u..].copy_from_slice(fp);

        let stats = RefCell::new(InnerStats::default());
        let rows: RefCell<Vec<OuterIterationRow>> = RefCell::new(Vec::new());
        let started = Instant::now();

        let vc_flat = vc.clone();
        let project = move |v: &mut [f64]| {
            let (u, p) = v.split_at_mut(n_u);
            vc_flat.project(u);
            apply_zero_mean(p);
        };

        let vc_u = vc.clone();
        let proj_u = move |v: &mut [f64]| vc_u.project(v);
        let proj_p = |v: &mut [f64]| apply_zero_mean(v);
        let vc_bt = vc.clone();
        let bt_fn = move |p: &[f64]| {
            let mut v = self.bt.apply(p);
            vc_bt.project(&mut v);
            v
        };
        let bdiv_fn = |u: &[f64]| self.b_precond.apply(u);

        let mut x = vec![0.0; n_u + n_p];
        let stop = match self.cfg.tol_saddle_rel {
            Some(rel) => {
                StoppingRule::relative_or_absolute(rel, self.cfg.tol_saddle, self.cfg.max_outer)
            }
            None => StoppingRule::absolute(self.cfg.tol_saddle, self.cfg.max_outer),
        };
        let report = {
            let rows_ref = &rows;
            let stats_ref = &stats;
            let mut wrapped = |v: &[f64]| {
                let (f, g) = v.split_at(n_u);
                let mut a_hat = |r: &[f64]| self.solve_a_block(r, stats_ref);
                let mut s_hat = |r: &[f64]| self.schur.apply(r, stats_ref);
                let mut ops = UzawaOps {
                    a: self.stack.top_op().as_ref(),
                    bt: &bt_fn,
                    b_div: &bdiv_fn,
                    a_hat_inv: &mut a_hat,
                    s_hat_inv: &mut s_hat,
                    project_u: &proj_u,
                    project_p: &proj_p,
                };
                let zero_u = vec![0.0; n_u];
                let zero_p = vec![0.0; n_p];
                let (zu, zp) = uzawa_step(
                    self.cfg.uzawa,
                    self.cfg.sigma,
                    self.cfg.omega,
                    &mut ops,
                    f,
                    g,
                    &zero_u,
                    &zero_p,
                );
                let mut z = vec![0.0; n_u + n_p];
                z[..n_u].copy_from_slice(&zu);
                z[n_u..].copy_from_slice(&zp);
                let mut r = rows_ref.borrow_mut();
                let k = r.len() + 1;
                r.push(OuterIterationRow {
                    iteration: k,
                    absolute_residual: f64::NAN,
                    relative_residual: f64::NAN,
                    seconds: started.elapsed().as_secs_f64(),
                });
                z
            };
            fgmres_solve(
                &saddle,
                &rhs,
                &mut x,
                &mut wrapped,
                Some(&project),
                &stop,
                &FgmresOptions {
                    restart: self.cfg.fgmres_restart,
                },
            )
        };

        let mut rows = rows.into_inner();
        for (row, res) in rows.iter_mut().zip(&report.residual_history) {
            row.absolute_residual = *res;
            row.relative_residual = res / report.initial_residual.max(f64::MIN_POSITIVE);
        }

        // Re-attach the Dirichlet surface data.
        let ext = bcs.surface_extension(&self.mesh, level);
        let mut u = x[..n_u].to_vec();
        for i in 0..n_u {
            u[i] += ext[i];
        }
        let mut p = x[n_u..].to_vec();
        apply_zero_mean(&mut p);

        let mut solution = BlockVector::zeros(&self.mesh, level);
        solution.u.coeffs = u;
        solution.p.coeffs = p;
        let pressure_shift = pressure_shift_constant(&solution.p);

        StokesOutcome {
            solution,
            pressure_shift,
            report,
            stats: stats.into_inner(),
            rows,
        }
    }
}

fn build_schur(
    mesh: &Arc<RefinedMesh>,
    cfg: &SolverConfig,
    stack: &VelocityStack,
    viscosity: &[LevelViscosity],
    top_visc: LevelViscosity,
    mg_cheap: &Arc<Multigrid>,
) -> SchurSolver {
    let level = cfg.max_level;
    match cfg.schur {
        SchurKind::Mass => {
            let mass = PressureMassOp {
                mesh: mesh.clone(),
                level,
                viscosity: top_visc,
                power: EtaPower::Inverse,
            };
            let inv_diag = mass.diagonal().iter().map(|&d| 1.0 / d).collect();
            SchurSolver::Mass(schur::MassSchur {
                mass,
                inv_diag,
                stop: StoppingRule::relative(cfg.tol_inv_mass, cfg.max_inner),
            })
        }
        SchurKind::WeightedBfbt => {
            let poisson_left = hierarchy::pressure_poisson_multigrid(
                mesh,
                cfg.min_level,
                cfg.max_level,
                viscosity,
                cfg.a_l,
                cfg.deg_a,
                cfg.m_a,
                cfg.tol_coarse,
                cfg.max_inner,
                cfg.power_iterations,
            );
            let poisson_right = hierarchy::pressure_poisson_multigrid(
                mesh,
                cfg.min_level,
                cfg.max_level,
                viscosity,
                cfg.a_r,
                cfg.deg_a,
                cfg.m_a,
                cfg.tol_coarse,
                cfg.max_inner,
                cfg.power_iterations,
            );
            let mass_left = VectorMassOp::new(
                mesh.clone(),
                level,
                top_visc.clone(),
                EtaPower::Sqrt,
                cfg.a_l,
            );
            let mass_right =
                VectorMassOp::new(mesh.clone(), level, top_visc, EtaPower::Sqrt, cfg.a_r);
            let mass_left_inv_diag = mass_left.diagonal().iter().map(|&d| 1.0 / d).collect();
            let mass_right_inv_diag = mass_right.diagonal().iter().map(|&d| 1.0 / d).collect();
            SchurSolver::WeightedBfbt(Box::new(schur::WeightedBfbtSchur {
                poisson_left,
                poisson_right,
                mass_left,
                mass_right,
                mass_left_inv_diag,
                mass_right_inv_diag,
                a_top: stack.top_op().clone(),
                b: DivOp {
                    mesh: mesh.clone(),
                    level,
                    kind: DivKind::Divergence,
                    grad_ln_density: None,
                },
                bt: GradOp {
                    mesh: mesh.clone(),
                    level,
                },
                vc: stack.top_constraints().clone(),
                stop_poisson: StoppingRule::relative_or_absolute(
                    cfg.tol_wbfbt,
                    cfg.tol_wbfbt,
                    cfg.max_inner,
                ),
                stop_mass: StoppingRule::relative(cfg.tol_vector_mass, cfg.max_inner),
            }))
        }
        SchurKind::VCycleBfbt => {
            let mass = PressureMassOp {
                mesh: mesh.clone(),
                level,
                viscosity: top_visc,
                power: EtaPower::Inverse,
            };
            let mass_inv_diag = mass.diagonal().iter().map(|&d| 1.0 / d).collect();
            SchurSolver::VCycleBfbt(Box::new(schur::VCycleBfbtSchur {
                cheap_mg: mg_cheap.clone(),
                a_top: stack.top_op().clone(),
                b: DivOp {
                    mesh: mesh.clone(),
                    level,
                    kind: DivKind::Divergence,
                    grad_ln_density: None,
                },
                bt: GradOp {
                    mesh: mesh.clone(),
                    level,
                },
                vc: stack.top_constraints().clone(),
                mass,
                mass_inv_diag,
                stop_outer: StoppingRule::relative(cfg.tol_vbfbt, cfg.max_inner),
                stop_mass: StoppingRule::relative(cfg.tol_inv_mass, cfg.max_inner),
            }))
        }
    }
}
