//! Time-integration checks: characteristics transport, diffusion-step fixed
//! points, boundedness without sources, and the temporal order of the
//! manufactured-solution study at a coarse level (the acceptance suite runs
//! the fine-level version).

mod common;

use common::annulus_mesh;
use mantle::app::{convergence_error, fitted_slope};
use mantle::energy::{
    self, bdf2_coefficients, DiffusionInputs, EnergyProblem, MmocConfig, SubstepPolicy,
    TemperatureDirichlet,
};
use mantle::femcore::{FieldFunction, FunctionSpace, SpaceKind};
use mantle::geometry::{build_annulus_macro_mesh, RefinedMesh};
use std::sync::Arc;

fn pure_diffusion_problem(kappa: f64, surface: f64, cmb: f64) -> EnergyProblem {
    EnergyProblem {
        kappa,
        adiabatic: 0.0,
        heating: 0.0,
        inv_density: Arc::new(|_| 1.0),
        grad_ln_density: Arc::new(|_| [0.0, 0.0]),
        eta: Arc::new(|_, _| 1.0),
        shear_prefactor: Arc::new(|_| 0.0),
        include_lhs_advection: false,
        shear_cutoff_surface: false,
        forcing: None,
        dirichlet: TemperatureDirichlet::Constants { surface, cmb },
    }
}

#[test]
fn mmoc_zero_velocity_is_identity() {
    let mesh = annulus_mesh(3);
    let space = FunctionSpace::new(mesh.clone(), SpaceKind::P2Scalar, 3);
    let t = FieldFunction::interpolate_scalar(space, |x| (x[0] * 2.0).sin() + x[1]);
    let zeros = vec![0.0; 2 * mesh.p2_node_count(3)];
    let out = energy::mmoc_advect(&t, &zeros, &zeros, 0.05, &MmocConfig::default());
    for i in 0..t.coeffs.len() {
        assert!((out.coeffs[i] - t.coeffs[i]).abs() < 1e-13);
    }
}

#[test]
fn mmoc_constant_advection_is_exact() {
    // Identity blending: linear and quadratic fields are exactly
    // representable, constant transport is resolved to machine precision.
    let mm = build_annulus_macro_mesh(8, 2, 0.5, 1.5).unwrap();
    let mesh = RefinedMesh::build_unblended(mm, 3);
    let level = 3;
    let space = FunctionSpace::new(mesh.clone(), SpaceKind::P2Scalar, level);
    let vspace = FunctionSpace::new(mesh.clone(), SpaceKind::P2Vector, level);
    let c = [0.21, -0.13];
    let tau = 0.1;
    let u = FieldFunction::interpolate_vector(vspace, |_| c);
    // Globally quadratic temperature: transported exactly by evaluation.
    let t = FieldFunction::interpolate_scalar(space, |x| {
        1.0 + x[0] + 0.5 * x[1] + x[0] * x[1] - 0.25 * x[0] * x[0]
    });
    let out = energy::mmoc_advect(&t, &u.coeffs, &u.coeffs, tau, &MmocConfig::default());
    let lat = mesh.p2_lattice(level);
    let mut checked = 0;
    for i in 0..lat.node_count {
        let x = lat.blended[i];
        let dep = [x[0] - c[0] * tau, x[1] - c[1] * tau];
        // Only nodes whose departure point stays well inside the domain.
        if mesh.blending.unblend(dep).is_none() {
            continue;
        }
        let r = (dep[0] * dep[0] + dep[1] * dep[1]).sqrt();
        if r < 0.56 || r > 1.37 {
            continue;
        }
        let exact = 1.0 + dep[0] + 0.5 * dep[1] + dep[0] * dep[1] - 0.25 * dep[0] * dep[0];
        assert!(
            (out.coeffs[i] - exact).abs() < 1e-12,
            "node {i}: {} vs {exact}",
            out.coeffs[i]
        );
        checked += 1;
    }
    assert!(checked > 100, "too few interior nodes checked: {checked}");
}

#[test]
fn rigid_rotation_backtracking_is_fifth_order_per_step() {
    // Exact representation of the rotation field on straight elements; a
    // single Runge-Kutta step per tau isolates the time error.
    let mm = build_annulus_macro_mesh(8, 2, 0.5, 1.5).unwrap();
    let mesh = RefinedMesh::build_unblended(mm, 3);
    let level = 3;
    let vspace = FunctionSpace::new(mesh.clone(), SpaceKind::P2Vector, level);
    let u = FieldFunction::interpolate_vector(vspace, |x| [-x[1], x[0]]);
    let x0 = [1.0, 0.0];
    let mut errs = Vec::new();
    for tau in [0.04, 0.02, 0.01] {
        let dep = energy::backtrack_departure(
            &mesh, level, &u.coeffs, &u.coeffs, tau, x0, 1, 1e-12,
        );
        let exact = [tau.cos(), -tau.sin()];
        let err = ((dep[0] - exact[0]).powi(2) + (dep[1] - exact[1]).powi(2)).sqrt();
        errs.push((tau, err));
    }
    let slope = fitted_slope(&errs);
    println!("backtracking errors {errs:?} slope {slope:.2}");
    assert!(slope >= 4.5, "slope {slope}");
}

#[test]
fn steady_diffusion_profile_is_a_fixed_point() {
    let mesh = annulus_mesh(3);
    let level = 3;
    let n = mesh.p2_node_count(level);
    let (ts, tc) = (0.1, 1.0);
    let problem = pure_diffusion_problem(3.0e-5, ts, tc);
    // March the pure diffusion problem to steady state with large steps,
    // then verify one BDF2 step keeps it.
    let space = FunctionSpace::new(mesh.clone(), SpaceKind::P2Scalar, level);
    let mut t = FieldFunction::interpolate_scalar(space, |x| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        tc + (ts - tc) * (r - 1.2037) / (2.2037 - 1.2037)
    });
    let zeros_u = vec![0.0; 2 * n];
    let s1 = energy::implicit_euler_coefficients();
    for _ in 0..60 {
        let inputs = DiffusionInputs {
            s: s1,
            tau: 50.0,
            t_new: 0.0,
            u_star: &zeros_u,
            t_star: &t.coeffs,
            t_hat_n: &t.coeffs,
            t_hat_nm1: &vec![0.0; n],
            initial: &t.coeffs,
        };
        let (tn, _) =
            energy::solve_diffusion_step(&mesh, level, &problem, &inputs, 1e-13, 300).unwrap();
        t = tn;
    }
    // One BDF2 step from the steady state.
    let s = bdf2_coefficients(0.05, 0.05).unwrap();
    let inputs = DiffusionInputs {
        s,
        tau: 0.05,
        t_new: 0.0,
        u_star: &zeros_u,
        t_star: &t.coeffs,
        t_hat_n: &t.coeffs,
        t_hat_nm1: &t.coeffs,
        initial: &t.coeffs,
    };
    let (t_next, _) =
        energy::solve_diffusion_step(&mesh, level, &problem, &inputs, 1e-13, 300).unwrap();
    let drift = t
        .coeffs
        .iter()
        .zip(&t_next.coeffs)
        .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
    assert!(drift < 1e-9, "steady state drift {drift}");
}

#[test]
fn solution_stays_bounded_without_sources() {
    // Advection + diffusion with zero sources: min/max within the history
    // and boundary window plus a small overshoot tolerance.
    let mesh = annulus_mesh(3);
    let level = 3;
    let n = mesh.p2_node_count(level);
    let (ts, tc) = (0.2, 0.9);
    let problem = pure_diffusion_problem(1e-3, ts, tc);
    let space = FunctionSpace::new(mesh.clone(), SpaceKind::P2Scalar, level);
    let vspace = FunctionSpace::new(mesh.clone(), SpaceKind::P2Vector, level);
    let mut t_prev = FieldFunction::interpolate_scalar(space.clone(), |x| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        0.2 + 0.7 * (2.2037 - r) + 0.05 * (3.0 * x[0]).sin() * (2.0 * x[1]).cos()
    });
    let mut t_cur = t_prev.clone();
    let u = FieldFunction::interpolate_vector(vspace, |x| {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let s = (r - 1.2037) * (2.2037 - r);
        [-x[1] * s, x[0] * s]
    });
    let lo0 = t_cur.coeffs.iter().fold(f64::INFINITY, |m, &v| m.min(v)).min(ts).min(tc);
    let hi0 = t_cur
        .coeffs
        .iter()
        .fold(f64::NEG_INFINITY, |m, &v| m.max(v))
        .max(ts)
        .max(tc);
    let window = hi0 - lo0;
    let tau = 0.02;
    let mmoc = MmocConfig::default();
    for step in 0..4 {
        let s = if step == 0 {
            energy::implicit_euler_coefficients()
        } else {
            bdf2_coefficients(tau, tau).unwrap()
        };
        let departures = energy::mmoc_departures(&mesh, level, &u.coeffs, &u.coeffs, tau, &mmoc);
        let t_hat_n = energy::evaluate_at_departures(&t_cur, &departures, mmoc.clamp_eps);
        let inner = FieldFunction {
            space: space.clone(),
            coeffs: energy::evaluate_at_departures(&t_prev, &departures, mmoc.clamp_eps),
        };
        let t_hat_nm1 = if step == 0 {
            vec![0.0; n]
        } else {
            energy::mmoc_advect(&inner, &u.coeffs, &u.coeffs, tau, &mmoc).coeffs
        };
        let inputs = DiffusionInputs {
            s,
            tau,
            t_new: 0.0,
            u_star: &u.coeffs,
            t_star: &t_cur.coeffs,
            t_hat_n: &t_hat_n,
            t_hat_nm1: &t_hat_nm1,
            initial: &t_cur.coeffs,
        };
        let (t_new, _) =
            energy::solve_diffusion_step(&mesh, level, &problem, &inputs, 1e-11, 300).unwrap();
        t_prev = t_cur;
        t_cur = t_new;
        let lo = t_cur.coeffs.iter().fold(f64::INFINITY, |m, &v| m.min(v));
        let hi = t_cur
            .coeffs
            .iter()
            .fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        assert!(
            lo >= lo0 - 0.05 * window && hi <= hi0 + 0.05 * window,
            "step {step}: [{lo}, {hi}] escapes [{lo0}, {hi0}] + 5%"
        );
    }
}

#[test]
fn temporal_order_is_second_at_a_coarse_level() {
    // Coarse-level version of the acceptance study (level 3, k = 0.1).
    let mm = build_annulus_macro_mesh(8, 2, 0.5, 1.5).unwrap();
    let mesh = RefinedMesh::build(mm, 3);
    let mut pts = Vec::new();
    for n in [8usize, 16, 32] {
        let err = convergence_error(&mesh, 3, 0.1, n, false, 1e-10).unwrap();
        pts.push((1.0 / n as f64, err));
    }
    let slope = fitted_slope(&pts);
    println!("coarse-level temporal errors {pts:?} slope {slope:.2}");
    assert!(slope > 1.7, "temporal slope {slope}");
}

#[test]
fn lhs_advection_variant_double_counts_transport() {
    // With the extrapolated-velocity advection term enabled on top of the
    // characteristics transport, the scheme converges to a different
    // equation: the error against the manufactured solution stalls.
    let mm = build_annulus_macro_mesh(8, 2, 0.5, 1.5).unwrap();
    let mesh = RefinedMesh::build(mm, 3);
    let e8 = convergence_error(&mesh, 3, 0.1, 8, true, 1e-10).unwrap();
    let e32 = convergence_error(&mesh, 3, 0.1, 32, true, 1e-10).unwrap();
    let slope = (e8 / e32).log2() / 2.0;
    println!("lhs-advection variant errors: N=8 {e8:.3e}, N=32 {e32:.3e}, slope {slope:.2}");
    assert!(slope < 1.5, "double-advection variant should not be second order");
}

#[test]
fn cfl_examples() {
    let mesh = annulus_mesh(2);
    let level = 2;
    let n = mesh.p2_node_count(level);
    // u = 0 -> tau_max.
    assert_eq!(
        energy::cfl_timestep(&mesh, level, &vec![0.0; 2 * n], 1.0, 0.07),
        0.07
    );
    // Constant speed 2: tau = C * h_min / 2 (the max of speed/h is at the
    // smallest element).
    let mut u = vec![0.0; 2 * n];
    for i in 0..n {
        u[2 * i] = 2.0;
    }
    let tau = energy::cfl_timestep(&mesh, level, &u, 1.0, 10.0);
    let expect = mesh.min_diameter(level) / 2.0;
    assert!((tau - expect).abs() < 1e-14);
    // Brute-force scan agreement for a nonuniform field.
    let lat = mesh.p2_lattice(level);
    for i in 0..n {
        let x = lat.blended[i];
        u[2 * i] = x[0];
        u[2 * i + 1] = -0.3 * x[1];
    }
    let tau = energy::cfl_timestep(&mesh, level, &u, 0.8, 10.0);
    let mut worst: f64 = 0.0;
    for (e, ids) in mesh.p2_element_nodes(level).iter().enumerate() {
        let mut speed: f64 = 0.0;
        for &id in ids {
            let k = 2 * id as usize;
            speed = speed.max((u[k] * u[k] + u[k + 1] * u[k + 1]).sqrt());
        }
        worst = worst.max(speed / mesh.element_diameter(level, e));
    }
    assert!((tau - 0.8 / worst).abs() < 1e-14);
    let _ = SubstepPolicy::Fixed(1);
}
