//! Time integration of the energy equation: variable-step BDF2 along
//! characteristics, particle-based semi-Lagrangian transport of the history
//! fields, the implicit diffusion/reaction solve, CFL step control, and the
//! coupled temperature/Stokes step.
//!
//! The divided difference over backtracked history values approximates the
//! material derivative, so the diffusion solve sees the energy equation
//! without advection; the extrapolated-velocity advection term on the
//! left-hand side can be enabled for comparison but is off by default.

use crate::femcore::operators::{
    scalar_load, shear_heating_load, surface_element_mask, EnergyCoefficients, EnergyOp,
    ScalarMassOp,
};
use crate::femcore::{FieldFunction, FunctionSpace, SpaceKind};
use crate::geometry::RefinedMesh;
use crate::krylov::{
    cg_solve, fgmres_solve, FgmresOptions, IterationReport, LinearOp, StoppingRule,
};
use crate::physics::PhysicalParams;
use crate::constraints::BoundaryConditionSet;
use crate::stokes::{SolverConfig, StokesOutcome, StokesSolver};
use rayon::prelude::*;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("temperature solver exhausted its budget: residual {residual:.3e} after {iterations} iterations")]
    SolverBudget { residual: f64, iterations: usize },
    #[error("nonpositive time step: {0}")]
    InvalidTimeStep(f64),
}

// ---------------------------------------------------------------------------
// BDF2 coefficients
// ---------------------------------------------------------------------------

/// Variable-step BDF2 divided-difference coefficients:
/// D = s_new T^{n+1} - s_old That^n + s_older That^{n-1}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bdf2Coefficients {
    pub s_new: f64,
    pub s_old: f64,
    pub s_older: f64,
}

pub fn bdf2_coefficients(tau_new: f64, tau_old: f64) -> Result<Bdf2Coefficients, EnergyError> {
    if !(tau_new > 0.0) {
        return Err(EnergyError::InvalidTimeStep(tau_new));
    }
    if !(tau_old > 0.0) {
        return Err(EnergyError::InvalidTimeStep(tau_old));
    }
    Ok(Bdf2Coefficients {
        s_new: (2.0 * tau_new + tau_old) / (tau_new + tau_old),
        s_old: (tau_new + tau_old) / tau_old,
        s_older: tau_new * tau_new / (tau_old * (tau_new + tau_old)),
    })
}

/// Implicit-Euler start coefficients for the first step of the multistep
/// method.
pub fn implicit_euler_coefficients() -> Bdf2Coefficients {
    Bdf2Coefficients {
        s_new: 1.0,
        s_old: 1.0,
        s_older: 0.0,
    }
}

// ---------------------------------------------------------------------------
// Linear extrapolation in time
// ---------------------------------------------------------------------------

/// f* = f^n + (f^n - f^{n-1}) tau_new / tau_old.
pub fn extrapolate(f_n: &[f64], f_nm1: &[f64], tau_new: f64, tau_old: f64) -> Vec<f64> {
    assert!(tau_old != 0.0, "extrapolation needs a previous step");
    let r = tau_new / tau_old;
    f_n.iter()
        .zip(f_nm1)
        .map(|(a, b)| a + (a - b) * r)
        .collect()
}

// ---------------------------------------------------------------------------
// Particle backtracking (method of characteristics)
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub enum SubstepPolicy {
    /// ceil(tau * max speed / min element diameter), at least one.
    AutoCfl,
    Fixed(usize),
}

#[derive(Clone, Copy, Debug)]
pub struct MmocConfig {
    pub substeps: SubstepPolicy,
    /// Radial clamp distance for departure points leaving the shell.
    pub clamp_eps: f64,
}

impl Default for MmocConfig {
    fn default() -> Self {
        MmocConfig {
            substeps: SubstepPolicy::AutoCfl,
            clamp_eps: 1e-12,
        }
    }
}

/// Clamps a departure point just inside the domain boundary.
fn clamp_radial(mesh: &RefinedMesh, x: [f64; 2], eps: f64) -> [f64; 2] {
    mesh.blending.clamp_inward(x, eps)
}

fn eval_velocity(mesh: &RefinedMesh, level: usize, u: &[f64], x: [f64; 2], eps: f64) -> [f64; 2] {
    let xc = clamp_radial(mesh, x, eps);
    crate::femcore::evaluate::evaluate_p2_vector(mesh, level, u, xc).unwrap_or([0.0, 0.0])
}

/// Classical fourth-order Runge-Kutta backtracking of one particle from `x`
/// over [t^{n+1} - tau, t^{n+1}] along the time-linear interpolation between
/// u_old (at t^n) and u_new (at t^{n+1}).
#[allow(clippy::too_many_arguments)]
pub fn backtrack_departure(
    mesh: &RefinedMesh,
    level: usize,
    u_new: &[f64],
    u_old: &[f64],
    tau: f64,
    x: [f64; 2],
    substeps: usize,
    clamp_eps: f64,
) -> [f64; 2] {
    // sigma in [0, tau] measures time backwards from t^{n+1}:
    // u(sigma, .) = ((tau - sigma) u_new + sigma u_old) / tau.
    let vel = |sigma: f64, p: [f64; 2]| -> [f64; 2] {
        let wn = (tau - sigma) / tau;
        let wo = sigma / tau;
        let vn = eval_velocity(mesh, level, u_new, p, clamp_eps);
        let vo = eval_velocity(mesh, level, u_old, p, clamp_eps);
        [-(wn * vn[0] + wo * vo[0]), -(wn * vn[1] + wo * vo[1])]
    };
    let h = tau / substeps as f64;
    let mut p = x;
    let mut sigma = 0.0;
    for _ in 0..substeps {
        let k1 = vel(sigma, p);
        let k2 = vel(
            sigma + 0.5 * h,
            [p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]],
        );
        let k3 = vel(
            sigma + 0.5 * h,
            [p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]],
        );
        let k4 = vel(sigma + h, [p[0] + h * k3[0], p[1] + h * k3[1]]);
        p = [
            p[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
            p[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        ];
        p = clamp_radial(mesh, p, clamp_eps);
        sigma += h;
    }
    p
}

fn substep_count(
    mesh: &RefinedMesh,
    level: usize,
    u_new: &[f64],
    u_old: &[f64],
    tau: f64,
    policy: SubstepPolicy,
) -> usize {
    match policy {
        SubstepPolicy::Fixed(n) => n.max(1),
        SubstepPolicy::AutoCfl => {
            let vmax = u_new
                .chunks(2)
                .chain(u_old.chunks(2))
                .map(|c| (c[0] * c[0] + c[1] * c[1]).sqrt())
                .fold(0.0f64, f64::max);
            let h = mesh.min_diameter(level);
            ((tau * vmax / h).ceil() as usize).max(1)
        }
    }
}

/// Departure points of every degree-2 node, in node order.
pub fn mmoc_departures(
    mesh: &RefinedMesh,
    level: usize,
    u_new: &[f64],
    u_old: &[f64],
    tau: f64,
    cfg: &MmocConfig,
) -> Vec<[f64; 2]> {
    let nsub = substep_count(mesh, level, u_new, u_old, tau, cfg.substeps);
    let lat = mesh.p2_lattice(level);
    (0..lat.node_count)
        .into_par_iter()
        .map(|i| {
            backtrack_departure(
                mesh,
                level,
                u_new,
                u_old,
                tau,
                lat.blended[i],
                nsub,
                cfg.clamp_eps,
            )
        })
        .collect()
}

/// Evaluates a degree-2 field at the given points (radially clamped).
pub fn evaluate_at_departures(
    field: &FieldFunction,
    points: &[[f64; 2]],
    clamp_eps: f64,
) -> Vec<f64> {
    let mesh = &field.space.mesh;
    let level = field.space.level;
    points
        .par_iter()
        .map(|&x| {
            let xc = clamp_radial(mesh, x, clamp_eps);
            crate::femcore::evaluate::evaluate_p2_scalar(mesh, level, &field.coeffs, xc)
                .or_else(|| {
                    // Roundoff at sector corners: nudge further inward.
                    let xn = clamp_radial(mesh, x, 1e-9);
                    crate::femcore::evaluate::evaluate_p2_scalar(mesh, level, &field.coeffs, xn)
                })
                .expect("clamped departure point inside shell")
        })
        .collect()
}

/// Semi-Lagrangian transport: That(x) = T(departure point of x).
pub fn mmoc_advect(
    t: &FieldFunction,
    u_new: &[f64],
    u_old: &[f64],
    tau: f64,
    cfg: &MmocConfig,
) -> FieldFunction {
    let mesh = t.space.mesh.clone();
    let level = t.space.level;
    let departures = mmoc_departures(&mesh, level, u_new, u_old, tau, cfg);
    let coeffs = evaluate_at_departures(t, &departures, cfg.clamp_eps);
    FieldFunction {
        space: t.space.clone(),
        coeffs,
    }
}

// ---------------------------------------------------------------------------
// CFL time-step control
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug)]
pub struct TimeControl {
    pub c_cfl: f64,
    pub tau_max: f64,
    /// BDF2 step-ratio window (zero-stability clipping).
    pub ratio_min: f64,
    pub ratio_max: f64,
}

impl Default for TimeControl {
    fn default() -> Self {
        TimeControl {
            c_cfl: 1.0,
            tau_max: 1e-2,
            ratio_min: 0.5,
            ratio_max: 1.5,
        }
    }
}

/// tau = C_cfl / max_K (nodal max speed on K / h_K), capped by tau_max.
pub fn cfl_timestep(mesh: &RefinedMesh, level: usize, u: &[f64], c_cfl: f64, tau_max: f64) -> f64 {
    let p2 = mesh.p2_element_nodes(level);
    let mut worst: f64 = 0.0;
    for (e, ids) in p2.iter().enumerate() {
        let mut speed: f64 = 0.0;
        for &id in ids {
            let i = 2 * id as usize;
            speed = speed.max((u[i] * u[i] + u[i + 1] * u[i + 1]).sqrt());
        }
        if speed > 0.0 {
            worst = worst.max(speed / mesh.element_diameter(level, e));
        }
    }
    if worst == 0.0 {
        tau_max
    } else {
        (c_cfl / worst).min(tau_max)
    }
}

// ---------------------------------------------------------------------------
// Diffusion/reaction solve
// ---------------------------------------------------------------------------

/// Dirichlet temperature data on both boundaries.
pub enum TemperatureDirichlet {
    Constants { surface: f64, cmb: f64 },
    /// Time-dependent data evaluated at boundary node positions.
    TimeDependent(Arc<dyn Fn(f64, [f64; 2]) -> f64 + Send + Sync>),
}

impl TemperatureDirichlet {
    fn extension(&self, mesh: &RefinedMesh, level: usize, t: f64) -> Vec<f64> {
        let lat = mesh.p2_lattice(level);
        let mut e = vec![0.0; lat.node_count];
        match self {
            TemperatureDirichlet::Constants { surface, cmb } => {
                for &n in &lat.surface_nodes {
                    e[n as usize] = *surface;
                }
                for &n in &lat.cmb_nodes {
                    e[n as usize] = *cmb;
                }
            }
            TemperatureDirichlet::TimeDependent(f) => {
                for &n in lat.surface_nodes.iter().chain(&lat.cmb_nodes) {
                    e[n as usize] = f(t, lat.blended[n as usize]);
                }
            }
        }
        e
    }
}

/// Scalar operator restricted to inner rows (Dirichlet rows act as identity).
struct ConstrainedScalarOp<'a> {
    inner: &'a EnergyOp,
    boundary: &'a [u32],
}

impl ConstrainedScalarOp<'_> {
    fn zero_boundary(&self, v: &mut [f64]) {
        for &n in self.boundary {
            v[n as usize] = 0.0;
        }
    }
}

impl LinearOp for ConstrainedScalarOp<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut xp = x.to_vec();
        self.zero_boundary(&mut xp);
        self.inner.apply(&xp, y);
        for &n in self.boundary {
            y[n as usize] = x[n as usize];
        }
    }
}

/// Model coefficients and closures of one energy solve.
pub struct EnergyProblem {
    /// k / (Pe C^p).
    pub kappa: f64,
    /// Di alpha / C^p.
    pub adiabatic: f64,
    /// H / C^p.
    pub heating: f64,
    pub inv_density: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
    pub grad_ln_density: Arc<dyn Fn([f64; 2]) -> [f64; 2] + Send + Sync>,
    /// Viscosity entering the shear heating term.
    pub eta: Arc<dyn Fn([f64; 2], f64) -> f64 + Send + Sync>,
    /// Pe Di / (Ra rho(x) C^p), the shear-heating prefactor.
    pub shear_prefactor: Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>,
    pub include_lhs_advection: bool,
    /// Zero shear heating on elements touching the surface.
    pub shear_cutoff_surface: bool,
    /// Extra right-hand side f(t, x) (manufactured-solution runs).
    pub forcing: Option<Arc<dyn Fn(f64, [f64; 2]) -> f64 + Send + Sync>>,
    pub dirichlet: TemperatureDirichlet,
}

impl EnergyProblem {
    pub fn from_params(params: &PhysicalParams) -> Self {
        let p1 = params.clone();
        let p2 = params.clone();
        let p3 = params.clone();
        let p4 = params.clone();
        EnergyProblem {
            kappa: params.k / (params.numbers.pe * params.cp),
            adiabatic: params.numbers.di * params.alpha / params.cp,
            heating: params.h / params.cp,
            inv_density: Arc::new(move |x| 1.0 / p1.density(x)),
            grad_ln_density: Arc::new(move |x| p2.grad_ln_density(x)),
            eta: Arc::new(move |x, t| p3.viscosity.eta(x, t)),
            shear_prefactor: Arc::new(move |x| {
                p4.numbers.pe * p4.numbers.di / (p4.numbers.ra * p4.density(x) * p4.cp)
            }),
            include_lhs_advection: params.include_lhs_advection,
            shear_cutoff_surface: params.shear_cutoff_surface,
            forcing: None,
            dirichlet: TemperatureDirichlet::Constants {
                surface: params.t_surface_nd,
                cmb: params.t_cmb_nd,
            },
        }
    }
}

pub struct DiffusionInputs<'a> {
    pub s: Bdf2Coefficients,
    pub tau: f64,
    /// Time of the new level (for Dirichlet data and forcing).
    pub t_new: f64,
    pub u_star: &'a [f64],
    pub t_star: &'a [f64],
    pub t_hat_n: &'a [f64],
    pub t_hat_nm1: &'a [f64],
    /// Initial guess, usually T^n.
    pub initial: &'a [f64],
}

/// Solves the discrete energy equation for T^{n+1} to the absolute residual
/// tolerance tol_abs. Flexible GMRES outer loop preconditioned by a
/// near-exact CG solve of the symmetric mass + diffusion part.
pub fn solve_diffusion_step(
    mesh: &Arc<RefinedMesh>,
    level: usize,
    problem: &EnergyProblem,
    inputs: &DiffusionInputs,
    tol_abs: f64,
    max_outer: usize,
) -> Result<(FieldFunction, IterationReport), EnergyError> {
    let n = mesh.p2_node_count(level);
    let coeffs = EnergyCoefficients {
        s_new: inputs.s.s_new,
        tau: inputs.tau,
        kappa: problem.kappa,
        adiabatic: problem.adiabatic,
        include_advection: problem.include_lhs_advection,
        symmetric_part_only: false,
    };
    let u_star = Arc::new(inputs.u_star.to_vec());
    let op = EnergyOp {
        mesh: mesh.clone(),
        level,
        coeffs,
        u_star: u_star.clone(),
        inv_density: problem.inv_density.clone(),
        grad_ln_density: problem.grad_ln_density.clone(),
    };
    let sym = EnergyOp {
        mesh: mesh.clone(),
        level,
        coeffs: EnergyCoefficients {
            symmetric_part_only: true,
            ..coeffs
        },
        u_star,
        inv_density: problem.inv_density.clone(),
        grad_ln_density: problem.grad_ln_density.clone(),
    };

    // Right-hand side: history mass terms + tau (heating + shear + forcing).
    let mass = ScalarMassOp {
        mesh: mesh.clone(),
        level,
    };
    let hist: Vec<f64> = inputs
        .t_hat_n
        .iter()
        .zip(inputs.t_hat_nm1)
        .map(|(a, b)| inputs.s.s_old * a - inputs.s.s_older * b)
        .collect();
    let mut b = vec![0.0; n];
    mass.apply(&hist, &mut b);
    if problem.heating != 0.0 {
        let h = problem.heating;
        let load = scalar_load(mesh, level, |_| h);
        for i in 0..n {
            b[i] += inputs.tau * load[i];
        }
    }
    {
        let cutoff_mask;
        let cutoff = if problem.shear_cutoff_surface {
            cutoff_mask = surface_element_mask(mesh, level);
            Some(cutoff_mask.as_slice())
        } else {
            None
        };
        let shear = shear_heating_load(
            mesh,
            level,
            inputs.u_star,
            inputs.t_star,
            |x, t| (problem.eta)(x, t),
            |x| (problem.shear_prefactor)(x),
            cutoff,
        );
        for i in 0..n {
            b[i] += inputs.tau * shear[i];
        }
    }
    if let Some(f) = &problem.forcing {
        let t_new = inputs.t_new;
        let load = scalar_load(mesh, level, |x| f(t_new, x));
        for i in 0..n {
            b[i] += inputs.tau * load[i];
        }
    }

    // Dirichlet elimination on both boundaries.
    let lat = mesh.p2_lattice(level);
    let boundary: Vec<u32> = {
        let mut v = lat.surface_nodes.clone();
        v.extend_from_slice(&lat.cmb_nodes);
        v.sort_unstable();
        v
    };
    let ext = problem.dirichlet.extension(mesh, level, inputs.t_new);
    let mut a_ext = vec![0.0; n];
    op.apply(&ext, &mut a_ext);
    for i in 0..n {
        b[i] -= a_ext[i];
    }
    for &nb in &boundary {
        b[nb as usize] = ext[nb as usize];
    }

    let cop = ConstrainedScalarOp {
        inner: &op,
        boundary: &boundary,
    };
    let csym = ConstrainedScalarOp {
        inner: &sym,
        boundary: &boundary,
    };
    let sym_diag = sym.diagonal();
    let inv_diag: Vec<f64> = sym_diag.iter().map(|&d| 1.0 / d).collect();

    let project = |v: &mut [f64]| {
        for &nb in &boundary {
            v[nb as usize] = 0.0;
        }
    };
    // The preconditioner solves the symmetric part essentially exactly.
    let mut precond = |r: &[f64]| -> Vec<f64> {
        let jacobi =
            |z: &[f64]| -> Vec<f64> { z.iter().zip(&inv_diag).map(|(a, d)| a * d).collect() };
        let mut x = vec![0.0; r.len()];
        cg_solve(
            &csym,
            r,
            &mut x,
            Some(&jacobi),
            Some(&project),
            &StoppingRule::relative(1e-12, 10_000),
        );
        x
    };

    let mut x: Vec<f64> = inputs.initial.to_vec();
    for &nb in &boundary {
        x[nb as usize] = ext[nb as usize];
    }
    // The iterate carries the Dirichlet values, so residuals vanish on the
    // boundary rows throughout the outer loop.
    let report = fgmres_solve(
        &cop,
        &b,
        &mut x,
        &mut precond,
        None,
        &StoppingRule::absolute(tol_abs, max_outer),
        &FgmresOptions::default(),
    );
    if !report.converged {
        return Err(EnergyError::SolverBudget {
            residual: report.final_residual,
            iterations: report.iterations,
        });
    }
    let space = FunctionSpace::new(mesh.clone(), SpaceKind::P2Scalar, level);
    Ok((FieldFunction { space, coeffs: x }, report))
}

// ---------------------------------------------------------------------------
// Coupled time step
// ---------------------------------------------------------------------------

/// State carried between time steps.
#[derive(Clone)]
pub struct TimeState {
    pub step: usize,
    pub t: f64,
    /// tau^n (the step that produced the current state; 0 at start).
    pub tau_prev: f64,
    pub temperature: FieldFunction,
    pub temperature_prev: FieldFunction,
    pub velocity: FieldFunction,
    pub velocity_prev: FieldFunction,
    pub pressure: FieldFunction,
}

impl TimeState {
    pub fn initial(mesh: &Arc<RefinedMesh>, level: usize, temperature: FieldFunction) -> Self {
        let vspace = FunctionSpace::new(mesh.clone(), SpaceKind::P2Vector, level);
        TimeState {
            step: 0,
            t: 0.0,
            tau_prev: 0.0,
            temperature_prev: temperature.clone(),
            temperature,
            velocity: FieldFunction::zeros(vspace.clone()),
            velocity_prev: FieldFunction::zeros(vspace),
            pressure: FieldFunction::zeros(FunctionSpace::new(
                mesh.clone(),
                SpaceKind::P1Scalar,
                level,
            )),
        }
    }
}

pub struct StepReport {
    pub tau: f64,
    pub energy: IterationReport,
    pub stokes: StokesOutcome,
}

/// One full step of the alternating scheme: step control, extrapolation,
/// characteristics transport, diffusion solve, then the Stokes solve with
/// the new temperature. Step 0 is the implicit-Euler start with zero
/// velocity history and an incompressible Stokes system.
#[allow(clippy::too_many_arguments)]
pub fn advance_step(
    mesh: &Arc<RefinedMesh>,
    params: &PhysicalParams,
    cfg: &SolverConfig,
    time: &TimeControl,
    mmoc: &MmocConfig,
    bcs: &BoundaryConditionSet,
    problem: &EnergyProblem,
    state: &TimeState,
) -> Result<(TimeState, StepReport), EnergyError> {
    let level = cfg.max_level;
    let first = state.step == 0;

    let tau = if first {
        cfl_timestep(mesh, level, &state.velocity.coeffs, time.c_cfl, time.tau_max)
    } else {
        let mut tau =
            cfl_timestep(mesh, level, &state.velocity.coeffs, time.c_cfl, time.tau_max);
        tau = tau.min(time.ratio_max * state.tau_prev);
        tau = tau.max(time.ratio_min * state.tau_prev);
        tau.min(time.tau_max)
    };

    let (s, u_star, t_star, t_hat_n, t_hat_nm1) = if first {
        // u^0 = 0: transport is the identity, extrapolations are the state.
        (
            implicit_euler_coefficients(),
            vec![0.0; state.velocity.coeffs.len()],
            state.temperature.coeffs.clone(),
            state.temperature.coeffs.clone(),
            vec![0.0; state.temperature.coeffs.len()],
        )
    } else {
        let s = bdf2_coefficients(tau, state.tau_prev)?;
        let u_star = extrapolate(
            &state.velocity.coeffs,
            &state.velocity_prev.coeffs,
            tau,
            state.tau_prev,
        );
        let t_star = extrapolate(
            &state.temperature.coeffs,
            &state.temperature_prev.coeffs,
            tau,
            state.tau_prev,
        );
        // One backtrack over the new interval serves both histories; the
        // inner-transported T^{n-1} is backtracked again over the old one.
        let departures =
            mmoc_departures(mesh, level, &u_star, &state.velocity.coeffs, tau, mmoc);
        let t_hat_n = evaluate_at_departures(&state.temperature, &departures, mmoc.clamp_eps);
        let inner = FieldFunction {
            space: state.temperature.space.clone(),
            coeffs: evaluate_at_departures(&state.temperature_prev, &departures, mmoc.clamp_eps),
        };
        let t_hat_nm1 = mmoc_advect(
            &inner,
            &state.velocity.coeffs,
            &state.velocity_prev.coeffs,
            state.tau_prev,
            mmoc,
        );
        (s, u_star, t_star, t_hat_n, t_hat_nm1.coeffs)
    };

    let inputs = DiffusionInputs {
        s,
        tau,
        t_new: state.t + tau,
        u_star: &u_star,
        t_star: &t_star,
        t_hat_n: &t_hat_n,
        t_hat_nm1: &t_hat_nm1,
        initial: &state.temperature.coeffs,
    };
    let (t_new, energy_report) = solve_diffusion_step(
        mesh,
        level,
        problem,
        &inputs,
        cfg.tol_temperature,
        cfg.max_outer,
    )?;

    // Stokes solve with the new temperature; the first step solves the
    // incompressible system.
    let use_surrogate = params.viscosity.surrogate().is_some();
    let solver = StokesSolver::build(mesh, cfg, params, &t_new.coeffs, !first, use_surrogate);
    let outcome = solver.solve(params, &t_new.coeffs, bcs);

    let new_state = TimeState {
        step: state.step + 1,
        t: state.t + tau,
        tau_prev: tau,
        temperature_prev: state.temperature.clone(),
        temperature: t_new,
        velocity_prev: state.velocity.clone(),
        velocity: outcome.solution.u.clone(),
        pressure: outcome.solution.p.clone(),
    };
    Ok((
        new_state,
        StepReport {
            tau,
            energy: energy_report,
            stokes: outcome,
        },
    ))
}
