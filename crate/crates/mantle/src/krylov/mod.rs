//! Generic iterative machinery: preconditioned CG, flexible GMRES, the
//! Chebyshev smoother and the geometric multigrid V-cycle.

mod cg;
mod chebyshev;
mod fgmres;
mod vcycle;

pub use cg::cg_solve;
pub use chebyshev::{chebyshev_smooth, estimate_spectral_bound, ChebyshevConfig, ChebyshevSetup};
pub use fgmres::{fgmres_solve, FgmresOptions};
pub use vcycle::{coarse_solve, MgLevel, Multigrid, Transfer, VCycleConfig};

/// Matrix-free linear operator on raw coefficient slices.
pub trait LinearOp: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);

    fn apply_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

/// Identity-free projection hook applied to keep iterates consistent
/// (free-slip rows, eliminated Dirichlet rows, zero-mean pressure).
pub type Projection<'a> = &'a (dyn Fn(&mut [f64]) + Sync);

/// Stopping criterion: converged when the absolute residual falls below
/// `abs` or the residual relative to the initial right-hand side falls
/// below `rel`, whichever applies first.
#[derive(Clone, Copy, Debug)]
pub struct StoppingRule {
    pub rel: Option<f64>,
    pub abs: Option<f64>,
    pub max_iter: usize,
}

impl StoppingRule {
    pub fn relative(tol: f64, max_iter: usize) -> Self {
        assert!(tol > 0.0);
        StoppingRule {
            rel: Some(tol),
            abs: None,
            max_iter,
        }
    }

    pub fn absolute(tol: f64, max_iter: usize) -> Self {
        assert!(tol > 0.0);
        StoppingRule {
            rel: None,
            abs: Some(tol),
            max_iter,
        }
    }

    pub fn relative_or_absolute(rel: f64, abs: f64, max_iter: usize) -> Self {
        assert!(rel > 0.0 && abs > 0.0);
        StoppingRule {
            rel: Some(rel),
            abs: Some(abs),
            max_iter,
        }
    }

    pub fn satisfied(&self, res: f64, res0: f64) -> bool {
        if let Some(abs) = self.abs {
            if res <= abs {
                return true;
            }
        }
        if let Some(rel) = self.rel {
            if res <= rel * res0 {
                return true;
            }
        }
        false
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug, Default)]
pub struct IterationReport {
    pub iterations: usize,
    pub converged: bool,
    pub initial_residual: f64,
    pub final_residual: f64,
    pub residual_history: Vec<f64>,
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Sequential reduction: bitwise reproducible independent of threads.
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
