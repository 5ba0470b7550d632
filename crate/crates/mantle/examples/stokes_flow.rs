//! One buoyancy-driven Stokes solve on the convection setup: builds the
//! viscosity from a noisy reference temperature, runs the flexible GMRES
//! saddle solver with the symmetric Uzawa preconditioner and the V-cycle
//! BFBT Schur approximation, and reports residuals and constraint checks.
//!
//! Run: cargo run --release --example stokes_flow [LEVEL]

use mantle::app::{build_params, initial_temperature, RunConfig};
use mantle::constraints::{arithmetic_mean, BoundaryConditionSet};
use mantle::geometry::{build_annulus_macro_mesh, RefinedMesh};
use mantle::stokes::{SolverConfig, StokesSolver};

fn main() {
    let level: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(3);
    let run_cfg = RunConfig::default();
    let params = build_params(&run_cfg);
    let (r_cmb, r_surface) = run_cfg.nondimensional_radii();
    let mesh = RefinedMesh::build(
        build_annulus_macro_mesh(8, 2, r_cmb, r_surface).unwrap(),
        level,
    );
    let cfg = SolverConfig {
        max_level: level,
        min_level: 0,
        viscosity_level: 1.min(level),
        ..SolverConfig::default()
    };
    let t0 = initial_temperature(&mesh, level, &params, 42);
    let bcs = BoundaryConditionSet::no_slip(params.t_surface_nd, params.t_cmb_nd);

    println!(
        "level {level}: {} velocity + {} pressure unknowns",
        2 * mesh.p2_node_count(level),
        mesh.p1_node_count(level)
    );
    let solver = StokesSolver::build(&mesh, &cfg, &params, &t0.coeffs, false, true);
    let out = solver.solve(&params, &t0.coeffs, &bcs);
    println!(
        "fgmres: {} iterations, residual {:.3e} -> {:.3e}, converged {}",
        out.report.iterations,
        out.report.initial_residual,
        out.report.final_residual,
        out.report.converged
    );
    println!(
        "inner work: {} velocity-block solves ({} CG iterations), {} Schur applications ({} inner iterations)",
        out.stats.a_block_solves,
        out.stats.a_block_iterations,
        out.stats.schur_applications,
        out.stats.schur_iterations
    );
    let u = &out.solution.u.coeffs;
    let u_inf = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    println!(
        "free-slip violation max |u.n| = {:.3e} (|u|_inf = {:.3e})",
        solver.constraints().max_normal_component(u),
        u_inf
    );
    println!(
        "pressure mean {:.3e}, shift constant c_p = {:.3e}",
        arithmetic_mean(&out.solution.p.coeffs),
        out.pressure_shift
    );
}
