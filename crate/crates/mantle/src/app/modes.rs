//! The three run modes: temporal-convergence study, saddle-point solver
//! benchmark, and time-dependent simulation.

use super::checkpoint;
use super::config::{RunConfig, RunMode};
use super::manufactured;
use super::output::{self, CsvWriter, VtkFields};
use crate::constraints::BoundaryConditionSet;
use crate::energy::{
    self, bdf2_coefficients, DiffusionInputs, EnergyProblem, MmocConfig,
    TemperatureDirichlet, TimeControl, TimeState,
};
use crate::femcore::operators::ScalarMassOp;
use crate::femcore::{FieldFunction, FunctionSpace, SpaceKind};
use crate::geometry::{build_annulus_macro_mesh, RefinedMesh};
use crate::krylov::LinearOp;
use crate::physics::{default_base_viscosity_table, PhysicalParams, ViscosityModel};
use crate::stokes::{SchurKind, StokesSolver, UzawaKind};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModeError {
    #[error("geometry: {0}")]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error("energy solve: {0}")]
    Energy(#[from] crate::energy::EnergyError),
    #[error("saddle-point solver did not reach its tolerance within the budget")]
    StokesBudget,
    #[error("checkpoint: {0}")]
    Checkpoint(#[from] checkpoint::CheckpointError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// Physical parameters assembled from a run configuration.
pub fn build_params(cfg: &RunConfig) -> PhysicalParams {
    let mut params = PhysicalParams::from_reference(&cfg.reference, cfg.exp_surrogate);
    let (r_cmb, r_surface) = cfg.nondimensional_radii();
    params.r_cmb = r_cmb;
    params.r_surface = r_surface;
    let table = if cfg.eta_base_table.is_empty() {
        default_base_viscosity_table(r_cmb, r_surface)
    } else {
        cfg.eta_base_table.clone()
    };
    params.viscosity = ViscosityModel::new(
        table,
        cfg.activation_energy,
        cfg.activation_volume,
        r_cmb,
        r_surface,
        params.t_cmb_nd,
        cfg.exp_surrogate,
    );
    params.noise_amplitude = cfg.noise_amplitude;
    params.shear_cutoff_surface = cfg.shear_cutoff_surface;
    params.include_lhs_advection = cfg.include_lhs_advection;
    if let Some(ra) = cfg.ra_override {
        params.numbers.ra = ra;
    }
    params
}

pub fn build_mesh(cfg: &RunConfig) -> Result<Arc<RefinedMesh>, ModeError> {
    let (r_cmb, r_surface) = cfg.nondimensional_radii();
    let mm = build_annulus_macro_mesh(cfg.n_tangential, cfg.n_radial, r_cmb, r_surface)?;
    Ok(RefinedMesh::build(mm, cfg.max_level))
}

/// Reference-temperature interpolant with seeded relative uniform noise on
/// interior nodes; boundary nodes carry the Dirichlet values.
pub fn initial_temperature(
    mesh: &Arc<RefinedMesh>,
    level: usize,
    params: &PhysicalParams,
    seed: u64,
) -> FieldFunction {
    let space = FunctionSpace::new(mesh.clone(), SpaceKind::P2Scalar, level);
    let mut t = FieldFunction::interpolate_scalar(space, |x| params.reference_temperature(x));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lat = mesh.p2_lattice(level);
    for i in 0..t.coeffs.len() {
        match lat.tags[i] {
            crate::geometry::BoundaryTag::Inner => {
                let noise: f64 = rng.random_range(-1.0..1.0);
                t.coeffs[i] *= 1.0 + params.noise_amplitude * noise;
            }
            crate::geometry::BoundaryTag::Surface => t.coeffs[i] = params.t_surface_nd,
            crate::geometry::BoundaryTag::Cmb => t.coeffs[i] = params.t_cmb_nd,
        }
    }
    t
}

// ---------------------------------------------------------------------------
// Temporal convergence mode
// ---------------------------------------------------------------------------

/// Domain and interval of the manufactured-solution study.
pub const CONV_R_CMB: f64 = 0.5;
pub const CONV_R_SURFACE: f64 = 1.5;
pub const CONV_T_START: f64 = 3.5;
pub const CONV_T_END: f64 = 4.5;

/// Discrete L2 error against the interpolated exact temperature after
/// integrating the manufactured problem over [7/2, 9/2] with N equal steps.
pub fn convergence_error(
    mesh: &Arc<RefinedMesh>,
    level: usize,
    diffusivity: f64,
    n_steps: usize,
    include_lhs_advection: bool,
    tol_temperature: f64,
) -> Result<f64, ModeError> {
    let tau = (CONV_T_END - CONV_T_START) / n_steps as f64;
    let space = FunctionSpace::new(mesh.clone(), SpaceKind::P2Scalar, level);
    let vspace = FunctionSpace::new(mesh.clone(), SpaceKind::P2Vector, level);
    let interp_t = |t: f64| {
        FieldFunction::interpolate_scalar(space.clone(), |x| manufactured::temperature(t, x))
    };
    let interp_u = |t: f64| {
        FieldFunction::interpolate_vector(vspace.clone(), |x| manufactured::velocity(t, x))
    };

    let problem = EnergyProblem {
        kappa: diffusivity,
        adiabatic: 1.0,
        heating: 1.0,
        inv_density: Arc::new(|_| 1.0),
        grad_ln_density: Arc::new(|_| [0.0, 0.0]),
        eta: Arc::new(|x, t| manufactured::viscosity(x, t)),
        shear_prefactor: Arc::new(|_| 1.0),
        include_lhs_advection,
        shear_cutoff_surface: false,
        forcing: Some(Arc::new(move |t, x| manufactured::forcing(t, x, diffusivity))),
        dirichlet: TemperatureDirichlet::TimeDependent(Arc::new(|t, x| {
            manufactured::temperature(t, x)
        })),
    };
    let mmoc = MmocConfig::default();
    let s = bdf2_coefficients(tau, tau)?;

    // History before the initial time is taken from the exact solution. The
    // velocity is known in closed form, so the scheme's velocity slots are
    // sampled exactly in time (the coupled simulation extrapolates because
    // u^{n+1} is unknown there; here extrapolating the 3-pi-frequency
    // oscillation at coarse tau would swamp the source terms).
    let mut t_prev = interp_t(CONV_T_START - tau);
    let mut t_cur = interp_t(CONV_T_START);
    for n in 0..n_steps {
        let t_n = CONV_T_START + n as f64 * tau;
        let u_new = interp_u(t_n + tau);
        let u_n = interp_u(t_n);
        let u_nm1 = interp_u(t_n - tau);
        let t_star = interp_t(t_n + tau);
        let departures =
            energy::mmoc_departures(mesh, level, &u_new.coeffs, &u_n.coeffs, tau, &mmoc);
        let t_hat_n = energy::evaluate_at_departures(&t_cur, &departures, mmoc.clamp_eps);
        let inner = FieldFunction {
            space: space.clone(),
            coeffs: energy::evaluate_at_departures(&t_prev, &departures, mmoc.clamp_eps),
        };
        let t_hat_nm1 = energy::mmoc_advect(&inner, &u_n.coeffs, &u_nm1.coeffs, tau, &mmoc);
        let inputs = DiffusionInputs {
            s,
            tau,
            t_new: t_n + tau,
            u_star: &u_new.coeffs,
            t_star: &t_star.coeffs,
            t_hat_n: &t_hat_n,
            t_hat_nm1: &t_hat_nm1.coeffs,
            initial: &t_cur.coeffs,
        };
        let (t_new, _) =
            energy::solve_diffusion_step(mesh, level, &problem, &inputs, tol_temperature, 300)?;
        t_prev = t_cur;
        t_cur = t_new;
    }

    // Mass-matrix norm of the nodal error at the final time.
    let exact = interp_t(CONV_T_END);
    let e: Vec<f64> = t_cur
        .coeffs
        .iter()
        .zip(&exact.coeffs)
        .map(|(a, b)| a - b)
        .collect();
    let mass = ScalarMassOp {
        mesh: mesh.clone(),
        level,
    };
    let me = mass.apply_vec(&e);
    Ok(e.iter().zip(&me).map(|(a, b)| a * b).sum::<f64>().sqrt())
}

#[derive(Clone, Copy, Debug)]
pub struct ConvergenceRow {
    pub level: usize,
    pub diffusivity: f64,
    pub n_steps: usize,
    pub tau: f64,
    pub l2_error: f64,
}

/// Runs the full study configured in `[convergence]` and writes one CSV.
pub fn run_convergence_test(cfg: &RunConfig) -> Result<Vec<ConvergenceRow>, ModeError> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let path = PathBuf::from(&cfg.output_dir).join("convergence.csv");
    let mut csv = CsvWriter::create(&path, "level,k,n_steps,tau,l2_error")?;
    let mut rows = Vec::new();
    let top = *cfg.conv_levels.iter().max().unwrap_or(&3);
    let mm = build_annulus_macro_mesh(cfg.n_tangential, cfg.n_radial, CONV_R_CMB, CONV_R_SURFACE)?;
    let mesh = RefinedMesh::build(mm, top);
    for &level in &cfg.conv_levels {
        for &k in &cfg.conv_diffusivities {
            for &n in &cfg.conv_steps {
                let err = convergence_error(
                    &mesh,
                    level,
                    k,
                    n,
                    cfg.include_lhs_advection,
                    cfg.tol_temperature,
                )?;
                let tau = (CONV_T_END - CONV_T_START) / n as f64;
                csv.row(&[
                    level.to_string(),
                    k.to_string(),
                    n.to_string(),
                    tau.to_string(),
                    err.to_string(),
                ])?;
                rows.push(ConvergenceRow {
                    level,
                    diffusivity: k,
                    n_steps: n,
                    tau,
                    l2_error: err,
                });
                eprintln!("convergence: level {level} k {k:.0e} N {n}: error {err:.6e}");
            }
        }
    }
    Ok(rows)
}

/// Least-squares slope of log(error) against log(tau).
pub fn fitted_slope(rows: &[(f64, f64)]) -> f64 {
    let n = rows.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(tau, err) in rows {
        let (x, y) = (tau.ln(), err.ln());
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

/// Error constant assuming second order: geometric mean of err / tau^2.
pub fn fitted_constant(rows: &[(f64, f64)]) -> f64 {
    let s: f64 = rows
        .iter()
        .map(|&(tau, err)| (err / (tau * tau)).ln())
        .sum::<f64>()
        / rows.len() as f64;
    s.exp()
}

// ---------------------------------------------------------------------------
// Solver benchmark mode
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct BenchRun {
    pub uzawa: UzawaKind,
    pub schur: SchurKind,
    pub a_l: f64,
    pub a_r: f64,
    pub omega: f64,
    pub converged: bool,
    /// (iteration, absolute residual, relative residual, seconds).
    pub trace: Vec<(usize, f64, f64, f64)>,
}

impl BenchRun {
    /// Iterations needed to reduce the relative residual below `target`.
    pub fn iterations_to_relative(&self, target: f64) -> Option<usize> {
        self.trace
            .iter()
            .find(|(_, _, rel, _)| *rel <= target)
            .map(|(it, _, _, _)| *it)
    }
}

/// Benchmarks all block preconditioners and Schur approximations on the
/// initial Stokes solve of the convection setup.
pub fn run_solver_bench(cfg: &RunConfig) -> Result<Vec<BenchRun>, ModeError> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mut bench_cfg = cfg.clone();
    bench_cfg.max_level = cfg.bench_level;
    bench_cfg.viscosity_level = cfg.viscosity_level.min(cfg.bench_level);
    let mesh = build_mesh(&bench_cfg)?;
    let params = build_params(&bench_cfg);
    let level = bench_cfg.max_level;
    let bcs = BoundaryConditionSet::no_slip(params.t_surface_nd, params.t_cmb_nd);

    // Temperature after the implicit-Euler start step, as the simulation
    // would see it for its first saddle-point solve.
    let t0 = initial_temperature(&mesh, level, &params, cfg.seed);
    let state = TimeState::initial(&mesh, level, t0);
    let problem = EnergyProblem::from_params(&params);
    let time = TimeControl {
        c_cfl: cfg.c_cfl,
        tau_max: cfg.tau_max,
        ..TimeControl::default()
    };
    let scfg = bench_cfg.solver();
    let s = crate::energy::implicit_euler_coefficients();
    let tau = time.tau_max;
    let zeros_u = vec![0.0; 2 * mesh.p2_node_count(level)];
    let inputs = DiffusionInputs {
        s,
        tau,
        t_new: tau,
        u_star: &zeros_u,
        t_star: &state.temperature.coeffs,
        t_hat_n: &state.temperature.coeffs,
        t_hat_nm1: &vec![0.0; mesh.p2_node_count(level)],
        initial: &state.temperature.coeffs,
    };
    let (t1, _) = energy::solve_diffusion_step(
        &mesh,
        level,
        &problem,
        &inputs,
        scfg.tol_temperature,
        scfg.max_outer,
    )?;

    let path = PathBuf::from(&cfg.output_dir).join("solver_bench.csv");
    let mut csv = CsvWriter::create(
        &path,
        "uzawa,schur,a_l,a_r,omega,iteration,abs_residual,rel_residual,seconds",
    )?;

    let variants = [
        (UzawaKind::Inexact, 1e-4),
        (UzawaKind::AdjointInexact, 1e-4),
        (UzawaKind::Symmetric, 1e-2),
    ];
    let schur_settings = [
        (SchurKind::Mass, 1.0, 1.0),
        (SchurKind::WeightedBfbt, 1.0, 1.0),
        (SchurKind::WeightedBfbt, 1.0, 10.0),
        (SchurKind::VCycleBfbt, 1.0, 1.0),
    ];

    let started = Instant::now();
    let mut runs = Vec::new();
    for (uzawa, tol_a) in variants {
        for (schur, a_l, a_r) in schur_settings {
            if started.elapsed().as_secs_f64() > cfg.wall_budget_seconds {
                eprintln!("bench: wall budget exhausted, stopping sweep");
                break;
            }
            let omega = if schur == SchurKind::WeightedBfbt {
                cfg.bench_omega_wbfbt
            } else {
                cfg.omega
            };
            let mut c = scfg.clone();
            c.uzawa = uzawa;
            c.schur = schur;
            c.tol_a = tol_a;
            c.a_l = a_l;
            c.a_r = a_r;
            c.omega = omega;
            c.tol_saddle = cfg.bench_target_abs;
            // The first Stokes solve of a run is incompressible.
            let solver = StokesSolver::build(&mesh, &c, &params, &t1.coeffs, false, cfg.exp_surrogate);
            let out = solver.solve(&params, &t1.coeffs, &bcs);
            let mut trace = Vec::new();
            for row in &out.rows {
                csv.row(&[
                    uzawa.label().into(),
                    schur.label().into(),
                    a_l.to_string(),
                    a_r.to_string(),
                    omega.to_string(),
                    row.iteration.to_string(),
                    row.absolute_residual.to_string(),
                    row.relative_residual.to_string(),
                    row.seconds.to_string(),
                ])?;
                trace.push((
                    row.iteration,
                    row.absolute_residual,
                    row.relative_residual,
                    row.seconds,
                ));
            }
            eprintln!(
                "bench: {} + {} (a_l={a_l}, a_r={a_r}, omega={omega}): {} iterations, converged = {}",
                uzawa.label(),
                schur.label(),
                out.report.iterations,
                out.report.converged
            );
            runs.push(BenchRun {
                uzawa,
                schur,
                a_l,
                a_r,
                omega,
                converged: out.report.converged,
                trace,
            });
        }
    }
    Ok(runs)
}

// ---------------------------------------------------------------------------
// Simulation mode
// ---------------------------------------------------------------------------

pub struct SimulationSummary {
    pub steps: usize,
    pub t_end: f64,
    pub final_state: TimeState,
}

pub fn run_simulation(
    cfg: &RunConfig,
    resume: Option<&Path>,
    checkpoint_path: Option<&Path>,
) -> Result<SimulationSummary, ModeError> {
    std::fs::create_dir_all(&cfg.output_dir)?;
    let mesh = build_mesh(cfg)?;
    let params = build_params(cfg);
    let level = cfg.max_level;
    let scfg = cfg.solver();
    let bcs = BoundaryConditionSet::no_slip(params.t_surface_nd, params.t_cmb_nd);
    let problem = EnergyProblem::from_params(&params);
    let time = TimeControl {
        c_cfl: cfg.c_cfl,
        tau_max: cfg.tau_max,
        ..TimeControl::default()
    };
    let mmoc = MmocConfig::default();

    let mut state = match resume {
        Some(path) => checkpoint::load(path, &mesh, level)?,
        None => TimeState::initial(
            &mesh,
            level,
            initial_temperature(&mesh, level, &params, cfg.seed),
        ),
    };

    let out_dir = PathBuf::from(&cfg.output_dir);
    let series_path = out_dir.join("timeseries.csv");
    let mut csv = CsvWriter::create(
        &series_path,
        "step,t,tau,t_min,t_max,rms_velocity,stokes_iterations,energy_iterations,seconds",
    )?;
    let default_ckpt = out_dir.join("checkpoint.bin");
    let ckpt_path = checkpoint_path.unwrap_or(&default_ckpt);

    let started = Instant::now();
    let mut steps_done = 0usize;
    while state.t < cfg.t_end && state.step < cfg.max_steps {
        if started.elapsed().as_secs_f64() > cfg.wall_budget_seconds {
            eprintln!("simulate: wall budget exhausted at step {}", state.step);
            break;
        }
        let step_started = Instant::now();
        let result = energy::advance_step(
            &mesh, &params, &scfg, &time, &mmoc, &bcs, &problem, &state,
        );
        let (new_state, report) = match result {
            Ok(x) => x,
            Err(e) => {
                // Leave a restartable checkpoint behind before failing.
                checkpoint::save(ckpt_path, &mesh, level, &state)?;
                return Err(e.into());
            }
        };
        if !report.stokes.report.converged {
            checkpoint::save(ckpt_path, &mesh, level, &new_state)?;
            return Err(ModeError::StokesBudget);
        }
        state = new_state;
        steps_done += 1;

        let t_min = state
            .temperature
            .coeffs
            .iter()
            .fold(f64::INFINITY, |m, &v| m.min(v));
        let t_max = state
            .temperature
            .coeffs
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        let rms = (state
            .velocity
            .coeffs
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            / (state.velocity.coeffs.len() as f64 / 2.0))
            .sqrt();
        csv.row(&[
            state.step.to_string(),
            state.t.to_string(),
            report.tau.to_string(),
            t_min.to_string(),
            t_max.to_string(),
            rms.to_string(),
            report.stokes.report.iterations.to_string(),
            report.energy.iterations.to_string(),
            format!("{:.3}", step_started.elapsed().as_secs_f64()),
        ])?;

        if cfg.vtk_every > 0 && state.step % cfg.vtk_every == 0 {
            write_fields_vtk(&out_dir, &mesh, level, &params, &state)?;
        }
        if cfg.checkpoint_every > 0 && state.step % cfg.checkpoint_every == 0 {
            checkpoint::save(ckpt_path, &mesh, level, &state)?;
        }
    }
    checkpoint::save(ckpt_path, &mesh, level, &state)?;
    write_fields_vtk(&out_dir, &mesh, level, &params, &state)?;
    Ok(SimulationSummary {
        steps: steps_done,
        t_end: state.t,
        final_state: state,
    })
}

fn write_fields_vtk(
    out_dir: &Path,
    mesh: &Arc<RefinedMesh>,
    level: usize,
    params: &PhysicalParams,
    state: &TimeState,
) -> std::io::Result<()> {
    let lat = mesh.lattice(level);
    let t_vals = output::p2_scalar_at_vertices(mesh, level, &state.temperature.coeffs);
    let t_dev: Vec<f64> = t_vals
        .iter()
        .enumerate()
        .map(|(i, &t)| t - params.reference_temperature(lat.blended[i]))
        .collect();
    let eta: Vec<f64> = t_vals
        .iter()
        .enumerate()
        .map(|(i, &t)| params.viscosity.eta(lat.blended[i], t))
        .collect();
    let u = output::p2_vector_at_vertices(mesh, level, &state.velocity.coeffs);
    let fields = VtkFields {
        scalars: vec![
            ("temperature", t_vals),
            ("temperature_deviation", t_dev),
            ("viscosity", eta),
            ("pressure", state.pressure.coeffs.clone()),
        ],
        vectors: vec![("velocity", u)],
    };
    let path = out_dir.join(format!("fields_{:06}.vtk", state.step));
    output::write_vtk(&path, mesh, level, &fields)
}

/// Dispatches on the configured mode (CLI entry point).
pub fn run(cfg: &RunConfig, resume: Option<&Path>, checkpoint: Option<&Path>) -> Result<(), ModeError> {
    match cfg.mode {
        RunMode::ConvergenceTest => {
            let rows = run_convergence_test(cfg)?;
            // Report fitted slopes per (level, diffusivity) group.
            for &level in &cfg.conv_levels {
                for &k in &cfg.conv_diffusivities {
                    let pts: Vec<(f64, f64)> = rows
                        .iter()
                        .filter(|r| r.level == level && r.diffusivity == k)
                        .map(|r| (r.tau, r.l2_error))
                        .collect();
                    if pts.len() >= 2 {
                        eprintln!(
                            "convergence: level {level} k {k:.0e}: slope {:.3}, constant {:.3e}",
                            fitted_slope(&pts),
                            fitted_constant(&pts)
                        );
                    }
                }
            }
            Ok(())
        }
        RunMode::SolverBench => run_solver_bench(cfg).map(|_| ()),
        RunMode::Simulate => run_simulation(cfg, resume, checkpoint).map(|_| ()),
    }
}
