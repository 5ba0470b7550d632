//! Shared test support: an independent dense assembler for every bilinear
//! form (the oracle the matrix-free operators are checked against) and a
//! dense LU factorisation for direct solves.
//!
//! The assembler deliberately retraces none of the matrix-free code path:
//! basis functions are re-derived from barycentric products, geometry is
//! recomputed from element corners and the blending Jacobian, and entries
//! come from (test, trial) double loops instead of field contractions.

#![allow(dead_code)]

pub mod dense;

use mantle::geometry::{build_annulus_macro_mesh, RefinedMesh};
use std::sync::Arc;

pub fn annulus_mesh(level: usize) -> Arc<RefinedMesh> {
    let mm = build_annulus_macro_mesh(8, 2, 1.2037, 2.2037).unwrap();
    RefinedMesh::build(mm, level)
}

pub fn small_annulus(r_cmb: f64, r_surface: f64, level: usize) -> Arc<RefinedMesh> {
    let mm = build_annulus_macro_mesh(8, 2, r_cmb, r_surface).unwrap();
    RefinedMesh::build(mm, level)
}

/// xorshift64* stream in [-0.5, 0.5).
pub struct TestRng(pub u64);

impl TestRng {
    pub fn next(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64 - 0.5
    }

    pub fn vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next()).collect()
    }
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
