//! Geometric multigrid V-cycle over a prebuilt operator hierarchy.
//!
//! Chebyshev pre-/post-smoothing on every level above the coarsest, a
//! diagonally preconditioned CG solve on the coarsest, and projection hooks
//! applied after smoothing and grid transfer.

use super::{cg_solve, chebyshev_smooth, ChebyshevSetup, IterationReport, LinearOp, StoppingRule};

/// Transfer between two adjacent hierarchy levels.
pub trait Transfer: Send + Sync {
    fn prolong_add(&self, coarse: &[f64], fine: &mut [f64]);
    fn restrict(&self, fine: &[f64], coarse: &mut [f64]);
}

#[derive(Clone, Copy, Debug)]
pub struct VCycleConfig {
    /// Pre- and post-smoothing sweeps per level.
    pub smooth_steps: usize,
    /// Stopping rule of the coarse-grid CG solve.
    pub coarse_stop: StoppingRule,
}

pub struct MgLevel {
    pub op: std::sync::Arc<dyn LinearOp + Send + Sync>,
    pub smoother: ChebyshevSetup,
    pub project: Option<std::sync::Arc<dyn Fn(&mut [f64]) + Send + Sync>>,
}

impl MgLevel {
    fn proj(&self, v: &mut [f64]) {
        if let Some(p) = &self.project {
            p(v);
        }
    }
}

/// Operator hierarchy, index 0 = coarsest level.
pub struct Multigrid {
    pub levels: Vec<MgLevel>,
    /// transfers[i] connects level i (coarse) and level i+1 (fine).
    pub transfers: Vec<Box<dyn Transfer>>,
    pub config: VCycleConfig,
}

impl Multigrid {
    pub fn finest(&self) -> usize {
        self.levels.len() - 1
    }

    /// One V-cycle applied to `x` for the right-hand side `b` on the finest level.
    pub fn vcycle(&self, b: &[f64], x: &mut [f64]) {
        self.cycle(self.finest(), b, x);
    }

    /// V-cycle from a zero initial guess, used as a preconditioner.
    pub fn precondition(&self, r: &[f64]) -> Vec<f64> {
        let mut z = vec![0.0; r.len()];
        self.cycle(self.finest(), r, &mut z);
        z
    }

    fn cycle(&self, l: usize, b: &[f64], x: &mut [f64]) {
        let level = &self.levels[l];
        let proj_ref: Option<super::Projection> = level.project.as_deref().map(|p| p as _);
        if l == 0 {
            coarse_solve(
                level.op.as_ref(),
                &level.smoother.inv_diag,
                b,
                x,
                &self.config.coarse_stop,
                proj_ref,
            );
            level.proj(x);
            return;
        }
        chebyshev_smooth(
            level.op.as_ref(),
            &level.smoother,
            b,
            x,
            self.config.smooth_steps,
            proj_ref,
        );

        let n = b.len();
        let mut r = vec![0.0; n];
        level.op.apply(x, &mut r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
        level.proj(&mut r);

        let nc = self.levels[l - 1].smoother.inv_diag.len();
        let mut rc = vec![0.0; nc];
        self.transfers[l - 1].restrict(&r, &mut rc);
        self.levels[l - 1].proj(&mut rc);

        let mut ec = vec![0.0; nc];
        self.cycle(l - 1, &rc, &mut ec);

        self.transfers[l - 1].prolong_add(&ec, x);
        level.proj(x);

        chebyshev_smooth(
            level.op.as_ref(),
            &level.smoother,
            b,
            x,
            self.config.smooth_steps,
            proj_ref,
        );
    }
}

/// Coarse-grid solve: diagonally preconditioned CG.
pub fn coarse_solve(
    op: &dyn LinearOp,
    inv_diag: &[f64],
    rhs: &[f64],
    x: &mut [f64],
    stop: &StoppingRule,
    project: Option<super::Projection>,
) -> IterationReport {
    let jacobi = |r: &[f64]| -> Vec<f64> { r.iter().zip(inv_diag).map(|(a, d)| a * d).collect() };
    cg_solve(op, rhs, x, Some(&jacobi), project, stop)
}
