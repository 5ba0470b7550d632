//! Uzawa type block preconditioners: one update step in the inexact,
//! adjoint inexact and symmetric orderings.
//!
//! ```text
//! inexact:   u+ = u + sigma Ahat^-1 (f - A u - B^T p)
//!            p+ = p - omega Shat^-1 (g - Bd u+)
//! adjoint:   p+ = p - omega Shat^-1 (g - Bd u)
//!            u+ = u + sigma Ahat^-1 (f - A u - B^T p+)
//! symmetric: velocity, pressure, velocity
//! ```
//!
//! `Bd` is the divergence used in the pressure update; it may carry the
//! density coupling while B^T never does. Projections are applied after
//! every sub-update.

use crate::krylov::LinearOp;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UzawaKind {
    Inexact,
    AdjointInexact,
    Symmetric,
}

impl UzawaKind {
    pub fn label(&self) -> &'static str {
        match self {
            UzawaKind::Inexact => "inexact",
            UzawaKind::AdjointInexact => "adjoint-inexact",
            UzawaKind::Symmetric => "symmetric",
        }
    }
}

/// Operator bundle for one Uzawa update; approximate inverses are `FnMut`
/// so they can carry iteration counters.
pub struct UzawaOps<'a> {
    pub a: &'a dyn LinearOp,
    pub bt: &'a dyn Fn(&[f64]) -> Vec<f64>,
    /// Divergence used in the pressure update (B or B + C).
    pub b_div: &'a dyn Fn(&[f64]) -> Vec<f64>,
    pub a_hat_inv: &'a mut dyn FnMut(&[f64]) -> Vec<f64>,
    pub s_hat_inv: &'a mut dyn FnMut(&[f64]) -> Vec<f64>,
    pub project_u: &'a dyn Fn(&mut [f64]),
    pub project_p: &'a dyn Fn(&mut [f64]),
}

/// One update step of the chosen block preconditioner from state (u, p).
pub fn uzawa_step(
    kind: UzawaKind,
    sigma: f64,
    omega: f64,
    ops: &mut UzawaOps,
    f: &[f64],
    g: &[f64],
    u: &[f64],
    p: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let velocity_update = |ops: &mut UzawaOps, u: &[f64], p: &[f64]| -> Vec<f64> {
        let mut r = vec![0.0; u.len()];
        ops.a.apply(u, &mut r);
        let btp = (ops.bt)(p);
        for i in 0..r.len() {
            r[i] = f[i] - r[i] - btp[i];
        }
        (ops.project_u)(&mut r);
        let du = (ops.a_hat_inv)(&r);
        let mut out = u.to_vec();
        for i in 0..out.len() {
            out[i] += sigma * du[i];
        }
        (ops.project_u)(&mut out);
        out
    };
    let pressure_update = |ops: &mut UzawaOps, u: &[f64], p: &[f64]| -> Vec<f64> {
        let bu = (ops.b_div)(u);
        let mut r: Vec<f64> = g.iter().zip(&bu).map(|(gi, bi)| gi - bi).collect();
        (ops.project_p)(&mut r);
        let dp = (ops.s_hat_inv)(&r);
        let mut out = p.to_vec();
        for i in 0..out.len() {
            out[i] -= omega * dp[i];
        }
        (ops.project_p)(&mut out);
        out
    };

    match kind {
        UzawaKind::Inexact => {
            let u1 = velocity_update(ops, u, p);
            let p1 = pressure_update(ops, &u1, p);
            (u1, p1)
        }
        UzawaKind::AdjointInexact => {
            let p1 = pressure_update(ops, u, p);
            let u1 = velocity_update(ops, u, &p1);
            (u1, p1)
        }
        UzawaKind::Symmetric => {
            let u_half = velocity_update(ops, u, p);
            let p1 = pressure_update(ops, &u_half, p);
            let u1 = velocity_update(ops, &u_half, &p1);
            (u1, p1)
        }
    }
}
