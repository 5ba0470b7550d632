//! Per-element pull-back geometry, cached per level and quadrature rule.
//!
//! For every quadrature point the cache stores the blended physical point,
//! the inverse-transpose of the total map Jacobian J_B J_F (chain rule for
//! physical gradients) and the weight w |det J_F| |det J_B|.

use super::quadrature::{rule, RuleKind, RULE_COUNT};
use crate::geometry::RefinedMesh;
use rayon::prelude::*;
use std::sync::OnceLock;

pub struct ElementGeometry {
    pub n_qp: usize,
    /// Blended physical coordinates, element-major.
    pub x: Vec<[f64; 2]>,
    /// (J_B J_F)^{-T} as [m00, m01, m10, m11].
    pub inv_jt: Vec<[f64; 4]>,
    /// Quadrature weight times |det J_F| |det J_B|.
    pub w: Vec<f64>,
}

impl ElementGeometry {
    #[inline]
    pub fn at(&self, element: usize, qp: usize) -> (usize, &[f64; 2], &[f64; 4], f64) {
        let idx = element * self.n_qp + qp;
        (idx, &self.x[idx], &self.inv_jt[idx], self.w[idx])
    }
}

pub struct CacheStore {
    geom: Vec<OnceLock<ElementGeometry>>,
    p1_transfer: Vec<OnceLock<super::transfer::SparseTransfer>>,
    p2_transfer: Vec<OnceLock<super::transfer::SparseTransfer>>,
}

impl CacheStore {
    pub fn new(geom_slots: usize) -> Self {
        let levels = geom_slots / RULE_COUNT;
        CacheStore {
            geom: (0..geom_slots).map(|_| OnceLock::new()).collect(),
            p1_transfer: (0..levels).map(|_| OnceLock::new()).collect(),
            p2_transfer: (0..levels).map(|_| OnceLock::new()).collect(),
        }
    }
}

impl RefinedMesh {
    /// Pull-back geometry of all elements of `level` for the given rule.
    pub fn geometry(&self, level: usize, kind: RuleKind) -> &ElementGeometry {
        let slot = level * RULE_COUNT + kind as usize;
        self.caches.geom[slot].get_or_init(|| build_geometry(self, level, kind))
    }

    /// Nodal prolongation for degree-1 fields from `coarse_level`.
    pub fn p1_transfer(&self, coarse_level: usize) -> &super::transfer::SparseTransfer {
        self.caches.p1_transfer[coarse_level]
            .get_or_init(|| super::transfer::build_p1_prolongation(self, coarse_level))
    }

    /// Nodal prolongation for degree-2 fields from `coarse_level`.
    pub fn p2_transfer(&self, coarse_level: usize) -> &super::transfer::SparseTransfer {
        self.caches.p2_transfer[coarse_level]
            .get_or_init(|| super::transfer::build_p2_prolongation(self, coarse_level))
    }
}

fn build_geometry(mesh: &RefinedMesh, level: usize, kind: RuleKind) -> ElementGeometry {
    let r = rule(kind);
    let nq = r.len();
    let n_elem = mesh.element_count(level);
    let mut x = vec![[0.0; 2]; n_elem * nq];
    let mut inv_jt = vec![[0.0; 4]; n_elem * nq];
    let mut w = vec![0.0; n_elem * nq];

    let chunks: Vec<(&mut [[f64; 2]], (&mut [[f64; 4]], &mut [f64]))> = x
        .chunks_mut(nq)
        .zip(inv_jt.chunks_mut(nq).zip(w.chunks_mut(nq)))
        .collect();
    chunks
        .into_par_iter()
        .enumerate()
        .for_each(|(e, (xe, (je, we)))| {
            let corners = mesh.element_corners(level, e);
            let layer = mesh.element_layer(level, e);
            let jf = [
                [corners[1][0] - corners[0][0], corners[2][0] - corners[0][0]],
                [corners[1][1] - corners[0][1], corners[2][1] - corners[0][1]],
            ];
            let det_f = jf[0][0] * jf[1][1] - jf[0][1] * jf[1][0];
            for (q, pt) in r.points.iter().enumerate() {
                let xt = [
                    corners[0][0] + jf[0][0] * pt[0] + jf[0][1] * pt[1],
                    corners[0][1] + jf[1][0] * pt[0] + jf[1][1] * pt[1],
                ];
                let (jb, det_b) = mesh.blending.jacobian_in_layer(layer, xt);
                xe[q] = mesh.blending.blend_in_layer(layer, xt);
                // Total Jacobian J = J_B J_F.
                let j = [
                    [
                        jb[0][0] * jf[0][0] + jb[0][1] * jf[1][0],
                        jb[0][0] * jf[0][1] + jb[0][1] * jf[1][1],
                    ],
                    [
                        jb[1][0] * jf[0][0] + jb[1][1] * jf[1][0],
                        jb[1][0] * jf[0][1] + jb[1][1] * jf[1][1],
                    ],
                ];
                let det = j[0][0] * j[1][1] - j[0][1] * j[1][0];
                // inv(J)^T = adj(J)^T / det.
                je[q] = [
                    j[1][1] / det,
                    -j[1][0] / det,
                    -j[0][1] / det,
                    j[0][0] / det,
                ];
                we[q] = r.weights[q] * det_f.abs() * det_b.abs();
            }
        });

    ElementGeometry {
        n_qp: nq,
        x,
        inv_jt,
        w,
    }
}
