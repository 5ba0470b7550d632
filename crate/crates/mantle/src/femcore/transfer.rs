//! Grid transfer between adjacent refinement levels.
//!
//! Prolongation is nodal interpolation of the coarse polynomial space, which
//! is exact for the nested spaces of red-refined meshes; restriction is its
//! transpose.

use super::basis;
use crate::geometry::{Lattice, RefinedMesh};

/// Sparse prolongation matrix in CSR layout, rows = fine nodes.
pub struct SparseTransfer {
    pub n_fine: usize,
    pub n_coarse: usize,
    row_ptr: Vec<u32>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl SparseTransfer {
    fn from_rows(rows: Vec<Vec<(u32, f64)>>, n_coarse: usize) -> Self {
        let n_fine = rows.len();
        let mut row_ptr = Vec::with_capacity(n_fine + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len() as u32);
        }
        SparseTransfer {
            n_fine,
            n_coarse,
            row_ptr,
            cols,
            vals,
        }
    }

    /// fine = P coarse, for fields with `comps` interleaved components.
    pub fn prolong(&self, coarse: &[f64], fine: &mut [f64], comps: usize) {
        debug_assert_eq!(coarse.len(), self.n_coarse * comps);
        debug_assert_eq!(fine.len(), self.n_fine * comps);
        for r in 0..self.n_fine {
            let lo = self.row_ptr[r] as usize;
            let hi = self.row_ptr[r + 1] as usize;
            for c in 0..comps {
                let mut acc = 0.0;
                for k in lo..hi {
                    acc += self.vals[k] * coarse[self.cols[k] as usize * comps + c];
                }
                fine[r * comps + c] = acc;
            }
        }
    }

    /// fine += P coarse.
    pub fn prolong_add(&self, coarse: &[f64], fine: &mut [f64], comps: usize) {
        debug_assert_eq!(coarse.len(), self.n_coarse * comps);
        debug_assert_eq!(fine.len(), self.n_fine * comps);
        for r in 0..self.n_fine {
            let lo = self.row_ptr[r] as usize;
            let hi = self.row_ptr[r + 1] as usize;
            for c in 0..comps {
                let mut acc = 0.0;
                for k in lo..hi {
                    acc += self.vals[k] * coarse[self.cols[k] as usize * comps + c];
                }
                fine[r * comps + c] += acc;
            }
        }
    }

    /// coarse = P^T fine (restriction).
    pub fn restrict(&self, fine: &[f64], coarse: &mut [f64], comps: usize) {
        debug_assert_eq!(coarse.len(), self.n_coarse * comps);
        debug_assert_eq!(fine.len(), self.n_fine * comps);
        coarse.fill(0.0);
        for r in 0..self.n_fine {
            let lo = self.row_ptr[r] as usize;
            let hi = self.row_ptr[r + 1] as usize;
            for c in 0..comps {
                let f = fine[r * comps + c];
                for k in lo..hi {
                    coarse[self.cols[k] as usize * comps + c] += self.vals[k] * f;
                }
            }
        }
    }
}

/// Degree-1 prolongation from `coarse_level` to `coarse_level + 1`: new
/// vertices are midpoints of coarse edges.
pub(crate) fn build_p1_prolongation(mesh: &RefinedMesh, coarse_level: usize) -> SparseTransfer {
    let coarse = mesh.lattice(coarse_level);
    let fine = mesh.lattice(coarse_level + 1);
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); fine.node_count];
    let nc = coarse.n;
    for m in 0..mesh.macro_mesh.triangles.len() {
        for b in 0..=2 * nc {
            for a in 0..=(2 * nc - b) {
                let fid = fine.node(m, a, b) as usize;
                if !rows[fid].is_empty() {
                    continue;
                }
                if a % 2 == 0 && b % 2 == 0 {
                    rows[fid].push((coarse.node(m, a / 2, b / 2), 1.0));
                } else if b % 2 == 0 {
                    // midpoint of horizontal coarse edge
                    let (i, j) = ((a - 1) / 2, b / 2);
                    rows[fid].push((coarse.node(m, i, j), 0.5));
                    rows[fid].push((coarse.node(m, i + 1, j), 0.5));
                } else if a % 2 == 0 {
                    let (i, j) = (a / 2, (b - 1) / 2);
                    rows[fid].push((coarse.node(m, i, j), 0.5));
                    rows[fid].push((coarse.node(m, i, j + 1), 0.5));
                } else {
                    // midpoint of the diagonal edge of cell (i, j)
                    let (i, j) = ((a - 1) / 2, (b - 1) / 2);
                    rows[fid].push((coarse.node(m, i + 1, j), 0.5));
                    rows[fid].push((coarse.node(m, i, j + 1), 0.5));
                }
            }
        }
    }
    SparseTransfer::from_rows(rows, coarse.node_count)
}

/// Degree-2 prolongation from `coarse_level` to `coarse_level + 1`: each
/// fine node is evaluated through the coarse element's quadratic basis.
pub(crate) fn build_p2_prolongation(mesh: &RefinedMesh, coarse_level: usize) -> SparseTransfer {
    // Degree-2 nodes of level L live on the vertex lattice of level L + 1;
    // fine degree-2 nodes on the lattice of level L + 2 (4x the cell grid).
    let coarse_nodes = mesh.lattice(coarse_level + 1);
    let fine_nodes = mesh.lattice(coarse_level + 2);
    let nc = mesh.lattice(coarse_level).n;
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); fine_nodes.node_count];
    for m in 0..mesh.macro_mesh.triangles.len() {
        for b in 0..=4 * nc {
            for a in 0..=(4 * nc - b) {
                let fid = fine_nodes.node(m, a, b) as usize;
                if !rows[fid].is_empty() {
                    continue;
                }
                if a % 2 == 0 && b % 2 == 0 {
                    rows[fid].push((coarse_nodes.node(m, a / 2, b / 2), 1.0));
                    continue;
                }
                // Locate the owning coarse micro-element cell.
                let (i, j) = (a / 4, b / 4);
                let (ra, rb) = (a - 4 * i, b - 4 * j);
                debug_assert!(i + j < nc);
                let (up, xi, eta) = if ra + rb <= 4 {
                    (true, ra as f64 / 4.0, rb as f64 / 4.0)
                } else {
                    (false, 1.0 - ra as f64 / 4.0, 1.0 - rb as f64 / 4.0)
                };
                let locals = p2_cell_nodes(coarse_nodes, m, i, j, up);
                let vals = basis::p2_values(xi, eta);
                for k in 0..6 {
                    if vals[k].abs() > 1e-14 {
                        rows[fid].push((locals[k], vals[k]));
                    }
                }
            }
        }
    }
    SparseTransfer::from_rows(rows, coarse_nodes.node_count)
}

/// Nodal injection of a degree-2 field from a fine to a coarser level
/// (coarse degree-2 nodes are a subset of the fine ones, bitwise).
pub fn inject_p2(
    mesh: &RefinedMesh,
    fine_level: usize,
    coarse_level: usize,
    fine: &[f64],
    comps: usize,
) -> Vec<f64> {
    assert!(coarse_level <= fine_level);
    let cl = mesh.lattice(coarse_level + 1);
    let fl = mesh.lattice(fine_level + 1);
    let shift = fine_level - coarse_level;
    let mut out = vec![0.0; cl.node_count * comps];
    for m in 0..mesh.macro_mesh.triangles.len() {
        let n = cl.n;
        for b in 0..=n {
            for a in 0..=(n - b) {
                let cid = cl.node(m, a, b) as usize;
                let fid = fl.node(m, a << shift, b << shift) as usize;
                for c in 0..comps {
                    out[cid * comps + c] = fine[fid * comps + c];
                }
            }
        }
    }
    out
}

/// Values of a degree-2 scalar field at the vertices of its level
/// (vertices are degree-2 nodes; pure index relabeling).
pub fn p2_at_vertices(mesh: &RefinedMesh, level: usize, p2: &[f64]) -> Vec<f64> {
    let vl = mesh.lattice(level);
    let nl = mesh.lattice(level + 1);
    let mut out = vec![0.0; vl.node_count];
    for m in 0..mesh.macro_mesh.triangles.len() {
        let n = vl.n;
        for j in 0..=n {
            for i in 0..=(n - j) {
                out[vl.node(m, i, j) as usize] = p2[nl.node(m, 2 * i, 2 * j) as usize];
            }
        }
    }
    out
}

fn p2_cell_nodes(lat: &Lattice, m: usize, i: usize, j: usize, up: bool) -> [u32; 6] {
    let (i, j) = (2 * i, 2 * j);
    if up {
        [
            lat.node(m, i, j),
            lat.node(m, i + 2, j),
            lat.node(m, i, j + 2),
            lat.node(m, i + 1, j),
            lat.node(m, i + 1, j + 1),
            lat.node(m, i, j + 1),
        ]
    } else {
        [
            lat.node(m, i + 2, j + 2),
            lat.node(m, i, j + 2),
            lat.node(m, i + 2, j),
            lat.node(m, i + 1, j + 2),
            lat.node(m, i + 1, j + 1),
            lat.node(m, i + 2, j + 1),
        ]
    }
}
