//! Inverse Schur complement approximations.
//!
//! Three variants: the inverse-viscosity scaled pressure mass, the weighted
//! BFBT (least-squares commutator with sqrt-viscosity weights and optional
//! asymmetric rescaling near the surface), and the V-cycle BFBT where the
//! weight inverse is a single cheap viscous-block V-cycle.

use super::hierarchy::ConstrainedVelocityOp;
use crate::constraints::{apply_zero_mean, VelocityConstraints};
use crate::femcore::operators::{DivOp, GradOp, PressureMassOp, VectorMassOp};
use crate::krylov::{cg_solve, LinearOp, Multigrid, StoppingRule};
use std::cell::RefCell;
use std::sync::Arc;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SchurKind {
    Mass,
    WeightedBfbt,
    VCycleBfbt,
}

impl SchurKind {
    pub fn label(&self) -> &'static str {
        match self {
            SchurKind::Mass => "mass",
            SchurKind::WeightedBfbt => "w-bfbt",
            SchurKind::VCycleBfbt => "vcycle-bfbt",
        }
    }
}

/// Running totals of inner work, accumulated across one outer solve.
#[derive(Clone, Copy, Debug, Default)]
pub struct InnerStats {
    pub a_block_solves: usize,
    pub a_block_iterations: usize,
    pub schur_applications: usize,
    pub schur_iterations: usize,
}

pub struct MassSchur {
    pub mass: PressureMassOp,
    pub inv_diag: Vec<f64>,
    pub stop: StoppingRule,
}

pub struct WeightedBfbtSchur {
    /// Poisson hierarchies for the left/right weights.
    pub poisson_left: Multigrid,
    pub poisson_right: Multigrid,
    pub mass_left: VectorMassOp,
    pub mass_right: VectorMassOp,
    pub mass_left_inv_diag: Vec<f64>,
    pub mass_right_inv_diag: Vec<f64>,
    pub a_top: Arc<ConstrainedVelocityOp>,
    pub b: DivOp,
    pub bt: GradOp,
    pub vc: Arc<VelocityConstraints>,
    pub stop_poisson: StoppingRule,
    pub stop_mass: StoppingRule,
}

pub struct VCycleBfbtSchur {
    /// Cheap viscous-block V-cycle (1 smoothing step, degree 1).
    pub cheap_mg: Arc<Multigrid>,
    pub a_top: Arc<ConstrainedVelocityOp>,
    pub b: DivOp,
    pub bt: GradOp,
    pub vc: Arc<VelocityConstraints>,
    /// Preconditioner for the outer CG: inverse-viscosity mass solve.
    pub mass: PressureMassOp,
    pub mass_inv_diag: Vec<f64>,
    pub stop_outer: StoppingRule,
    pub stop_mass: StoppingRule,
}

pub enum SchurSolver {
    Mass(MassSchur),
    WeightedBfbt(Box<WeightedBfbtSchur>),
    VCycleBfbt(Box<VCycleBfbtSchur>),
}

impl SchurSolver {
    pub fn kind(&self) -> SchurKind {
        match self {
            SchurSolver::Mass(_) => SchurKind::Mass,
            SchurSolver::WeightedBfbt(_) => SchurKind::WeightedBfbt,
            SchurSolver::VCycleBfbt(_) => SchurKind::VCycleBfbt,
        }
    }

    /// Applies the approximate inverse Schur complement to a zero-mean
    /// pressure vector; the output is re-projected to zero mean.
    pub fn apply(&self, q: &[f64], stats: &RefCell<InnerStats>) -> Vec<f64> {
        let out = match self {
            SchurSolver::Mass(m) => {
                let jacobi =
                    |r: &[f64]| -> Vec<f64> { r.iter().zip(&m.inv_diag).map(|(a, d)| a * d).collect() };
                let mut x = vec![0.0; q.len()];
                let proj = |v: &mut [f64]| apply_zero_mean(v);
                let rep = cg_solve(&m.mass, q, &mut x, Some(&jacobi), Some(&proj), &m.stop);
                stats.borrow_mut().schur_iterations += rep.iterations;
                x
            }
            SchurSolver::WeightedBfbt(w) => {
                let proj_p = |v: &mut [f64]| apply_zero_mean(v);
                let vc = w.vc.clone();
                let proj_u = move |v: &mut [f64]| vc.project(v);

                // Right Poisson solve K_{1/sqrt(eta_r)}^{-1} q.
                let mut v1 = vec![0.0; q.len()];
                let pre_r = |r: &[f64]| w.poisson_right.precondition(r);
                let rep = cg_solve(
                    w.poisson_right.levels.last().unwrap().op.as_ref(),
                    q,
                    &mut v1,
                    Some(&pre_r),
                    Some(&proj_p),
                    &w.stop_poisson,
                );
                stats.borrow_mut().schur_iterations += rep.iterations;

                let mut v2 = w.bt.apply(&v1);
                proj_u(&mut v2);
                // Vector mass solves with Jacobi CG.
                let jac_r = |r: &[f64]| -> Vec<f64> {
                    r.iter()
                        .zip(&w.mass_right_inv_diag)
                        .map(|(a, d)| a * d)
                        .collect()
                };
                let mut v3 = vec![0.0; v2.len()];
                let rep = cg_solve(
                    &w.mass_right,
                    &v2,
                    &mut v3,
                    Some(&jac_r),
                    Some(&proj_u),
                    &w.stop_mass,
                );
                stats.borrow_mut().schur_iterations += rep.iterations;

                let mut v4 = vec![0.0; v3.len()];
                w.a_top.apply(&v3, &mut v4);
                proj_u(&mut v4);

                let jac_l = |r: &[f64]| -> Vec<f64> {
                    r.iter()
                        .zip(&w.mass_left_inv_diag)
                        .map(|(a, d)| a * d)
                        .collect()
                };
                let mut v5 = vec![0.0; v4.len()];
                let rep = cg_solve(
                    &w.mass_left,
                    &v4,
                    &mut v5,
                    Some(&jac_l),
                    Some(&proj_u),
                    &w.stop_mass,
                );
                stats.borrow_mut().schur_iterations += rep.iterations;

                let mut v6 = w.b.apply(&v5);
                apply_zero_mean(&mut v6);

                // Left Poisson solve.
                let mut out = vec![0.0; q.len()];
                let pre_l = |r: &[f64]| w.poisson_left.precondition(r);
                let rep = cg_solve(
                    w.poisson_left.levels.last().unwrap().op.as_ref(),
                    &v6,
                    &mut out,
                    Some(&pre_l),
                    Some(&proj_p),
                    &w.stop_poisson,
                );
                stats.borrow_mut().schur_iterations += rep.iterations;
                out
            }
            SchurSolver::VCycleBfbt(v) => {
                let proj_p = |x: &mut [f64]| apply_zero_mean(x);
                let solve_commutator = |rhs: &[f64], stats: &RefCell<InnerStats>| -> Vec<f64> {
                    // CG on B Ahat_C^{-1} B^T, preconditioned by the scaled
                    // mass solve.
                    let op = CommutatorOp {
                        cheap_mg: &v.cheap_mg,
                        b: &v.b,
                        bt: &v.bt,
                        vc: &v.vc,
                    };
                    let pre = |r: &[f64]| -> Vec<f64> {
                        let jac = |z: &[f64]| -> Vec<f64> {
                            z.iter()
                                .zip(&v.mass_inv_diag)
                                .map(|(a, d)| a * d)
                                .collect()
                        };
                        let mut x = vec![0.0; r.len()];
                        let proj = |w: &mut [f64]| apply_zero_mean(w);
                        let rep =
                            cg_solve(&v.mass, r, &mut x, Some(&jac), Some(&proj), &v.stop_mass);
                        stats.borrow_mut().schur_iterations += rep.iterations;
                        x
                    };
                    let mut x = vec![0.0; rhs.len()];
                    let rep = cg_solve(&op, rhs, &mut x, Some(&pre), Some(&proj_p), &v.stop_outer);
                    stats.borrow_mut().schur_iterations += rep.iterations;
                    x
                };

                let w1 = solve_commutator(q, stats);
                // Middle operator B Ahat_C^{-1} A Ahat_C^{-1} B^T.
                let mut t1 = v.bt.apply(&w1);
                v.vc.project(&mut t1);
                let mut t2 = vec![0.0; t1.len()];
                v.cheap_mg.vcycle(&t1, &mut t2);
                v.vc.project(&mut t2);
                let mut t3 = vec![0.0; t2.len()];
                v.a_top.apply(&t2, &mut t3);
                v.vc.project(&mut t3);
                let mut t4 = vec![0.0; t3.len()];
                v.cheap_mg.vcycle(&t3, &mut t4);
                v.vc.project(&mut t4);
                let mut mid = v.b.apply(&t4);
                apply_zero_mean(&mut mid);

                solve_commutator(&mid, stats)
            }
        };
        let mut out = out;
        apply_zero_mean(&mut out);
        stats.borrow_mut().schur_applications += 1;
        out
    }
}

/// B Ahat_C^{-1} B^T as a linear operator on the pressure space.
struct CommutatorOp<'a> {
    cheap_mg: &'a Multigrid,
    b: &'a DivOp,
    bt: &'a GradOp,
    vc: &'a VelocityConstraints,
}

impl LinearOp for CommutatorOp<'_> {
    fn dim(&self) -> usize {
        self.b.dim_out()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut v = self.bt.apply(x);
        self.vc.project(&mut v);
        let mut z = vec![0.0; v.len()];
        self.cheap_mg.vcycle(&v, &mut z);
        self.vc.project(&mut z);
        let out = self.b.apply(&z);
        y.copy_from_slice(&out);
        apply_zero_mean(y);
    }
}
