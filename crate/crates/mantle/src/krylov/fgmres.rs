//! Flexible GMRES with right preconditioning.
//!
//! The preconditioned directions are stored so the preconditioner may change
//! between iterations (inner Krylov solves with tolerances). Consistent
//! (projected) right-hand sides and initial guesses keep the iteration on
//! singular-but-consistent systems inside the orthogonal complement of the
//! null space.

use super::{dot, norm, IterationReport, LinearOp, Projection, StoppingRule};

#[derive(Clone, Copy, Debug)]
pub struct FgmresOptions {
    pub restart: usize,
}

impl Default for FgmresOptions {
    fn default() -> Self {
        FgmresOptions { restart: 50 }
    }
}

pub fn fgmres_solve(
    op: &dyn LinearOp,
    rhs: &[f64],
    x: &mut [f64],
    precond: &mut dyn FnMut(&[f64]) -> Vec<f64>,
    project: Option<Projection>,
    stop: &StoppingRule,
    opts: &FgmresOptions,
) -> IterationReport {
    let n = rhs.len();
    let m = opts.restart;
    let proj = |v: &mut [f64]| {
        if let Some(p) = project {
            p(v);
        }
    };

    let mut report = IterationReport::default();
    let res0 = {
        let mut b = rhs.to_vec();
        proj(&mut b);
        norm(&b)
    };
    report.initial_residual = res0;
    if res0 == 0.0 {
        // Consistent zero system.
        report.converged = true;
        return report;
    }

    let mut total_iters = 0usize;
    loop {
        let mut r = vec![0.0; n];
        op.apply(x, &mut r);
        for i in 0..n {
            r[i] = rhs[i] - r[i];
        }
        proj(&mut r);
        let beta = norm(&r);
        if stop.satisfied(beta, res0) {
            report.converged = true;
            report.final_residual = beta;
            report.iterations = total_iters;
            return report;
        }
        if total_iters >= stop.max_iter {
            report.final_residual = beta;
            report.iterations = total_iters;
            return report;
        }

        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0f64; m]; m + 1];
        let mut cs = vec![0.0f64; m];
        let mut sn = vec![0.0f64; m];
        let mut g = vec![0.0f64; m + 1];
        g[0] = beta;
        let mut first = r;
        for vi in first.iter_mut() {
            *vi /= beta;
        }
        v.push(first);

        let mut j_used = 0;
        let mut happy = false;
        for j in 0..m {
            let mut zj = precond(&v[j]);
            proj(&mut zj);
            let mut w = vec![0.0; n];
            op.apply(&zj, &mut w);
            proj(&mut w);
            z.push(zj);

            for (i, vi) in v.iter().enumerate() {
                let hij = dot(&w, vi);
                h[i][j] = hij;
                for k in 0..n {
                    w[k] -= hij * vi[k];
                }
            }
            let hnext = norm(&w);
            h[j + 1][j] = hnext;

            // Givens rotations.
            for i in 0..j {
                let t = cs[i] * h[i][j] + sn[i] * h[i + 1][j];
                h[i + 1][j] = -sn[i] * h[i][j] + cs[i] * h[i + 1][j];
                h[i][j] = t;
            }
            let denom = (h[j][j] * h[j][j] + hnext * hnext).sqrt();
            if denom == 0.0 {
                j_used = j + 1;
                happy = true;
                break;
            }
            cs[j] = h[j][j] / denom;
            sn[j] = hnext / denom;
            h[j][j] = denom;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];

            total_iters += 1;
            j_used = j + 1;
            let res = g[j + 1].abs();
            report.residual_history.push(res);

            if hnext <= f64::EPSILON * res0 {
                happy = true;
                break;
            }
            if stop.satisfied(res, res0) || total_iters >= stop.max_iter {
                break;
            }
            for k in 0..n {
                w[k] /= hnext;
            }
            v.push(w);
        }

        // Back substitution on the j_used x j_used triangular system.
        let mut y = vec![0.0; j_used];
        for i in (0..j_used).rev() {
            let mut s = g[i];
            for k in i + 1..j_used {
                s -= h[i][k] * y[k];
            }
            y[i] = s / h[i][i];
        }
        for (yi, zi) in y.iter().zip(&z) {
            for k in 0..n {
                x[k] += yi * zi[k];
            }
        }
        proj(x);

        let last_res = report.residual_history.last().copied().unwrap_or(0.0);
        if happy || stop.satisfied(last_res, res0) {
            // Recompute the true residual for the report.
            let mut rr = vec![0.0; n];
            op.apply(x, &mut rr);
            for i in 0..n {
                rr[i] = rhs[i] - rr[i];
            }
            proj(&mut rr);
            report.final_residual = norm(&rr);
            report.converged = stop.satisfied(report.final_residual, res0) || happy;
            report.iterations = total_iters;
            return report;
        }
        if total_iters >= stop.max_iter {
            let mut rr = vec![0.0; n];
            op.apply(x, &mut rr);
            for i in 0..n {
                rr[i] = rhs[i] - rr[i];
            }
            proj(&mut rr);
            report.final_residual = norm(&rr);
            report.converged = stop.satisfied(report.final_residual, res0);
            report.iterations = total_iters;
            return report;
        }
    }
}
