//! Preconditioned conjugate gradients with optional projection hooks.

use super::{dot, norm, IterationReport, LinearOp, Projection, StoppingRule};

/// Solves op x = rhs for symmetric positive (semi)definite operators.
///
/// `precond` maps a residual to a preconditioned residual; `project` keeps
/// iterates in the constrained subspace (applied to residuals and search
/// directions). The residual history records sqrt(<r, z>).
pub fn cg_solve(
    op: &dyn LinearOp,
    rhs: &[f64],
    x: &mut [f64],
    precond: Option<&dyn Fn(&[f64]) -> Vec<f64>>,
    project: Option<Projection>,
    stop: &StoppingRule,
) -> IterationReport {
    let n = rhs.len();
    let proj = |v: &mut [f64]| {
        if let Some(p) = project {
            p(v);
        }
    };

    let mut r = vec![0.0; n];
    op.apply(x, &mut r);
    for i in 0..n {
        r[i] = rhs[i] - r[i];
    }
    proj(&mut r);

    let res0 = norm(&r);
    let mut report = IterationReport {
        initial_residual: res0,
        ..Default::default()
    };
    if res0 == 0.0 {
        report.converged = true;
        return report;
    }
    if stop.satisfied(res0, res0) {
        report.converged = true;
        report.final_residual = res0;
        return report;
    }

    let apply_precond = |r: &[f64]| -> Vec<f64> {
        let mut z = match precond {
            Some(m) => m(r),
            None => r.to_vec(),
        };
        proj(&mut z);
        z
    };

    let mut z = apply_precond(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    report.residual_history.push(rz.abs().sqrt());
    let mut q = vec![0.0; n];

    for it in 1..=stop.max_iter {
        op.apply(&p, &mut q);
        proj(&mut q);
        let pq = dot(&p, &q);
        if pq <= 0.0 {
            // Lost positivity (projected null space or roundoff); stop here.
            report.iterations = it - 1;
            report.final_residual = norm(&r);
            report.converged = stop.satisfied(report.final_residual, res0);
            return report;
        }
        let alpha = rz / pq;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        proj(&mut r);
        let res = norm(&r);
        report.iterations = it;
        if stop.satisfied(res, res0) {
            report.converged = true;
            report.final_residual = res;
            return report;
        }
        z = apply_precond(&r);
        let rz_new = dot(&r, &z);
        report.residual_history.push(rz_new.abs().sqrt());
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }

    let mut rr = vec![0.0; n];
    op.apply(x, &mut rr);
    for i in 0..n {
        rr[i] = rhs[i] - rr[i];
    }
    proj(&mut rr);
    report.final_residual = norm(&rr);
    report.converged = stop.satisfied(report.final_residual, res0);
    report
}
