//! Structured (red) refinement of the macro mesh.
//!
//! Each macro triangle is subdivided into 4^L congruent sub-triangles by
//! halving edges L times. Nodes are organised as barycentric lattices: level
//! L has a lattice with 2^L subdivisions per macro edge. Lattice points on
//! shared macro vertices/edges are deduplicated with a canonical
//! parameterisation so neighbouring macros agree bitwise on node positions.
//!
//! The same machinery serves both polynomial orders: the degree-2 Lagrange
//! nodes (vertices plus edge midpoints) of the level-L mesh are exactly the
//! vertex lattice of level L+1, so a mesh refined to `max_level` stores
//! lattices up to `max_level + 1`.

use super::{BlendingMap, BoundaryTag, GeometryError, MacroMesh};
use crate::femcore::geomcache::CacheStore;
use std::collections::HashMap;
use std::sync::Arc;

/// Vertex lattice of one refinement level over all macro triangles.
pub struct Lattice {
    pub level: usize,
    /// Subdivisions per macro edge (2^level).
    pub n: usize,
    pub node_count: usize,
    /// Global node id per macro triangle and local lattice index.
    pub macro_nodes: Vec<Vec<u32>>,
    /// Node coordinates in the unblended domain.
    pub coords: Vec<[f64; 2]>,
    /// Node coordinates mapped onto the annulus.
    pub blended: Vec<[f64; 2]>,
    pub tags: Vec<BoundaryTag>,
    /// Node ids on the surface boundary, ascending.
    pub surface_nodes: Vec<u32>,
    /// Node ids on the core-mantle boundary, ascending.
    pub cmb_nodes: Vec<u32>,
}

impl Lattice {
    /// Local index of lattice point (i, j) with i + j <= n; rows ordered by j.
    #[inline]
    pub fn local_index(n: usize, i: usize, j: usize) -> usize {
        j * (n + 1) - (j * j - j) / 2 + i
    }

    #[inline]
    pub fn node(&self, macro_idx: usize, i: usize, j: usize) -> u32 {
        self.macro_nodes[macro_idx][Self::local_index(self.n, i, j)]
    }
}

/// One micro triangle: cell (i, j) of a macro's lattice, upward or downward.
#[derive(Clone, Copy, Debug)]
pub struct ElementId {
    pub macro_idx: u32,
    pub i: u16,
    pub j: u16,
    pub up: bool,
}

/// Macro mesh plus per-level refinement topology and blended geometry.
pub struct RefinedMesh {
    pub macro_mesh: MacroMesh,
    pub blending: BlendingMap,
    pub max_level: usize,
    lattices: Vec<Lattice>,
    elements: Vec<Vec<ElementId>>,
    p1_ids: Vec<Vec<[u32; 3]>>,
    p2_ids: Vec<Vec<[u32; 6]>>,
    min_h: Vec<f64>,
    pub(crate) caches: CacheStore,
}

impl RefinedMesh {
    /// Refines `macro_mesh` uniformly up to `max_level`, with blending onto
    /// the circular annulus.
    pub fn build(macro_mesh: MacroMesh, max_level: usize) -> Arc<RefinedMesh> {
        let blending = BlendingMap::new(&macro_mesh);
        Self::build_with_blending(macro_mesh, max_level, blending)
    }

    /// As `build`, with the identity map instead of annulus blending
    /// (polygonal domain; used by tests and generic solver checks).
    pub fn build_unblended(macro_mesh: MacroMesh, max_level: usize) -> Arc<RefinedMesh> {
        let blending = BlendingMap::identity(&macro_mesh);
        Self::build_with_blending(macro_mesh, max_level, blending)
    }

    pub fn build_with_blending(
        macro_mesh: MacroMesh,
        max_level: usize,
        blending: BlendingMap,
    ) -> Arc<RefinedMesh> {
        let lattices: Vec<Lattice> = (0..=max_level + 1)
            .map(|l| build_lattice(&macro_mesh, &blending, l))
            .collect();
        let mut elements = Vec::with_capacity(max_level + 1);
        let mut p1_ids = Vec::with_capacity(max_level + 1);
        let mut p2_ids = Vec::with_capacity(max_level + 1);
        let mut min_h = Vec::with_capacity(max_level + 1);
        for level in 0..=max_level {
            let elems = enumerate_elements(&macro_mesh, level);
            let p1 = elems
                .iter()
                .map(|e| p1_nodes(&lattices[level], e))
                .collect::<Vec<_>>();
            let p2 = elems
                .iter()
                .map(|e| p2_nodes(&lattices[level + 1], e))
                .collect::<Vec<_>>();
            let mut h_min = f64::INFINITY;
            for ids in &p1 {
                h_min = h_min.min(diameter(&lattices[level].coords, ids));
            }
            elements.push(elems);
            p1_ids.push(p1);
            p2_ids.push(p2);
            min_h.push(h_min);
        }
        let n_slots = (max_level + 1) * crate::femcore::quadrature::RULE_COUNT;
        Arc::new(RefinedMesh {
            macro_mesh,
            blending,
            max_level,
            lattices,
            elements,
            p1_ids,
            p2_ids,
            min_h,
            caches: CacheStore::new(n_slots),
        })
    }

    pub fn lattice(&self, level: usize) -> &Lattice {
        &self.lattices[level]
    }

    pub fn elements(&self, level: usize) -> &[ElementId] {
        &self.elements[level]
    }

    pub fn element_count(&self, level: usize) -> usize {
        self.elements[level].len()
    }

    /// Vertex (degree-1 node) ids of every element on `level`.
    pub fn p1_element_nodes(&self, level: usize) -> &[[u32; 3]] {
        &self.p1_ids[level]
    }

    /// Degree-2 Lagrange node ids of every element on `level`
    /// (3 vertices followed by the opposite-ordered edge midpoints).
    pub fn p2_element_nodes(&self, level: usize) -> &[[u32; 6]] {
        &self.p2_ids[level]
    }

    /// Number of degree-1 nodes on `level`.
    pub fn p1_node_count(&self, level: usize) -> usize {
        self.lattices[level].node_count
    }

    /// Number of degree-2 nodes on `level` (equals V + E of the micro mesh).
    pub fn p2_node_count(&self, level: usize) -> usize {
        self.lattices[level + 1].node_count
    }

    /// The lattice carrying the degree-2 nodes of `level`.
    pub fn p2_lattice(&self, level: usize) -> &Lattice {
        &self.lattices[level + 1]
    }

    /// Longest edge of the unblended micro triangle (curvature neglected).
    pub fn element_diameter(&self, level: usize, element: usize) -> f64 {
        diameter(
            &self.lattices[level].coords,
            &self.p1_ids[level][element],
        )
    }

    /// Smallest element diameter on `level`.
    pub fn min_diameter(&self, level: usize) -> f64 {
        self.min_h[level]
    }

    /// Unblended corner coordinates of an element.
    pub fn element_corners(&self, level: usize, element: usize) -> [[f64; 2]; 3] {
        let ids = &self.p1_ids[level][element];
        let c = &self.lattices[level].coords;
        [
            c[ids[0] as usize],
            c[ids[1] as usize],
            c[ids[2] as usize],
        ]
    }

    /// Radial layer of an element (for the blending map).
    pub fn element_layer(&self, level: usize, element: usize) -> usize {
        self.macro_mesh.triangle_layer[self.elements[level][element].macro_idx as usize]
    }

    /// Whether any degree-2 node of the element lies on the surface boundary.
    pub fn element_touches_surface(&self, level: usize, element: usize) -> bool {
        let tags = &self.lattices[level + 1].tags;
        self.p2_ids[level][element]
            .iter()
            .any(|&n| tags[n as usize] == BoundaryTag::Surface)
    }

    /// Locates the element containing a physical point and its reference
    /// coordinates there, via the analytic inverse of the blending map.
    pub fn locate(&self, level: usize, x_phys: [f64; 2]) -> Result<(usize, [f64; 2]), GeometryError> {
        let xt = self
            .blending
            .unblend(x_phys)
            .ok_or(GeometryError::OutsideDomain(x_phys[0], x_phys[1]))?;
        let layer = self
            .blending
            .physical_layer(x_phys)
            .ok_or(GeometryError::OutsideDomain(x_phys[0], x_phys[1]))?;
        let nt = self.macro_mesh.n_tangential;
        let nr = self.macro_mesh.n_radial;
        let theta = xt[1].atan2(xt[0]).rem_euclid(2.0 * std::f64::consts::PI);
        let w = 2.0 * std::f64::consts::PI / nt as f64;
        let sector = ((theta / w) as usize).min(nt - 1);
        // Construction order: trapezoid (layer, sector) owns macros 2k, 2k+1.
        // Roundoff near sector rays and layer rings is absorbed by probing
        // the neighbouring trapezoids.
        for dl in [0isize, -1, 1] {
            let l = layer as isize + dl;
            if l < 0 || l >= nr as isize {
                continue;
            }
            for ds in [0isize, -1, 1] {
                let s = (sector as isize + ds).rem_euclid(nt as isize) as usize;
                let base = 2 * (l as usize * nt + s);
                for m in [base, base + 1] {
                    if let Some(hit) = self.locate_in_macro(level, m, xt) {
                        return Ok(hit);
                    }
                }
            }
        }
        Err(GeometryError::OutsideDomain(x_phys[0], x_phys[1]))
    }

    fn locate_in_macro(&self, level: usize, m: usize, xt: [f64; 2]) -> Option<(usize, [f64; 2])> {
        let [a, b, c] = self.macro_mesh.triangles[m];
        let (pa, pb, pc) = (
            self.macro_mesh.vertices[a],
            self.macro_mesh.vertices[b],
            self.macro_mesh.vertices[c],
        );
        let det = (pb[0] - pa[0]) * (pc[1] - pa[1]) - (pb[1] - pa[1]) * (pc[0] - pa[0]);
        let l1 = ((xt[0] - pa[0]) * (pc[1] - pa[1]) - (xt[1] - pa[1]) * (pc[0] - pa[0])) / det;
        let l2 = ((pb[0] - pa[0]) * (xt[1] - pa[1]) - (pb[1] - pa[1]) * (xt[0] - pa[0])) / det;
        let tol = 1e-12;
        if l1 < -tol || l2 < -tol || l1 + l2 > 1.0 + tol {
            return None;
        }
        let n = self.lattices[level].n;
        let nf = n as f64;
        let (u, v) = ((l1.clamp(0.0, 1.0) * nf), (l2.clamp(0.0, 1.0) * nf));
        let mut i = (u as usize).min(n - 1);
        let mut j = (v as usize).min(n - 1);
        if i + j > n - 1 {
            // Roundoff on the hypotenuse; pull back into the triangle.
            let over = i + j - (n - 1);
            if u - i as f64 > v - j as f64 {
                j -= over.min(j);
            } else {
                i -= over.min(i);
            }
        }
        let (fu, fv) = (u - i as f64, v - j as f64);
        let up = fu + fv <= 1.0 + tol || i + j == n - 1;
        let (eref, xi) = if up {
            (
                ElementId {
                    macro_idx: m as u32,
                    i: i as u16,
                    j: j as u16,
                    up: true,
                },
                [fu.clamp(0.0, 1.0), fv.clamp(0.0, 1.0)],
            )
        } else {
            (
                ElementId {
                    macro_idx: m as u32,
                    i: i as u16,
                    j: j as u16,
                    up: false,
                },
                [(1.0 - fu).clamp(0.0, 1.0), (1.0 - fv).clamp(0.0, 1.0)],
            )
        };
        Some((self.element_index(level, &eref), xi))
    }

    /// Position of an element in the level's deterministic enumeration.
    fn element_index(&self, level: usize, e: &ElementId) -> usize {
        let n = self.lattices[level].n;
        let per_macro = n * n;
        // Enumeration: for j, for i: up(i,j) then down(i,j) when it exists.
        // Row j holds (n - j) up and (n - 1 - j) down triangles.
        let j = e.j as usize;
        let i = e.i as usize;
        let row_offset: usize = (0..j).map(|r| (n - r) + (n - 1 - r)).sum();
        let in_row = if e.up { 2 * i } else { 2 * i + 1 };
        e.macro_idx as usize * per_macro + row_offset + in_row
    }
}

fn diameter(coords: &[[f64; 2]], ids: &[u32; 3]) -> f64 {
    let p = [
        coords[ids[0] as usize],
        coords[ids[1] as usize],
        coords[ids[2] as usize],
    ];
    let mut h: f64 = 0.0;
    for k in 0..3 {
        let (a, b) = (p[k], p[(k + 1) % 3]);
        h = h.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
    }
    h
}

fn enumerate_elements(macro_mesh: &MacroMesh, level: usize) -> Vec<ElementId> {
    let n = 1usize << level;
    let mut out = Vec::with_capacity(macro_mesh.triangles.len() * n * n);
    for m in 0..macro_mesh.triangles.len() {
        for j in 0..n {
            for i in 0..n - j {
                out.push(ElementId {
                    macro_idx: m as u32,
                    i: i as u16,
                    j: j as u16,
                    up: true,
                });
                if i + j < n - 1 {
                    out.push(ElementId {
                        macro_idx: m as u32,
                        i: i as u16,
                        j: j as u16,
                        up: false,
                    });
                }
            }
        }
    }
    out
}

fn p1_nodes(lat: &Lattice, e: &ElementId) -> [u32; 3] {
    let m = e.macro_idx as usize;
    let (i, j) = (e.i as usize, e.j as usize);
    if e.up {
        [lat.node(m, i, j), lat.node(m, i + 1, j), lat.node(m, i, j + 1)]
    } else {
        [
            lat.node(m, i + 1, j + 1),
            lat.node(m, i, j + 1),
            lat.node(m, i + 1, j),
        ]
    }
}

fn p2_nodes(fine: &Lattice, e: &ElementId) -> [u32; 6] {
    let m = e.macro_idx as usize;
    let (i, j) = (2 * e.i as usize, 2 * e.j as usize);
    if e.up {
        [
            fine.node(m, i, j),
            fine.node(m, i + 2, j),
            fine.node(m, i, j + 2),
            fine.node(m, i + 1, j),
            fine.node(m, i + 1, j + 1),
            fine.node(m, i, j + 1),
        ]
    } else {
        [
            fine.node(m, i + 2, j + 2),
            fine.node(m, i, j + 2),
            fine.node(m, i + 2, j),
            fine.node(m, i + 1, j + 2),
            fine.node(m, i + 1, j + 1),
            fine.node(m, i + 2, j + 1),
        ]
    }
}

#[derive(Hash, PartialEq, Eq, Clone, Copy)]
enum EntityKey {
    Vertex(usize),
    /// Canonical edge point: (smaller vertex, larger vertex, step from smaller).
    Edge(usize, usize, usize),
}

fn build_lattice(macro_mesh: &MacroMesh, blending: &BlendingMap, level: usize) -> Lattice {
    let n = 1usize << level;
    let nf = n as f64;
    let mut key_ids: HashMap<EntityKey, u32> = HashMap::new();
    let mut coords: Vec<[f64; 2]> = Vec::new();
    let mut tags: Vec<BoundaryTag> = Vec::new();
    let mut macro_nodes = Vec::with_capacity(macro_mesh.triangles.len());

    for tri in &macro_mesh.triangles {
        let [va, vb, vc] = *tri;
        let (pa, pb, pc) = (
            macro_mesh.vertices[va],
            macro_mesh.vertices[vb],
            macro_mesh.vertices[vc],
        );
        let mut ids = vec![0u32; (n + 1) * (n + 2) / 2];
        for j in 0..=n {
            for i in 0..=(n - j) {
                let loc = Lattice::local_index(n, i, j);
                let key = classify(i, j, n, va, vb, vc);
                let id = match key {
                    Some(k) => {
                        if let Some(&g) = key_ids.get(&k) {
                            g
                        } else {
                            let g = coords.len() as u32;
                            let (xy, tag) = entity_position(macro_mesh, &k, n);
                            coords.push(xy);
                            tags.push(tag);
                            key_ids.insert(k, g);
                            g
                        }
                    }
                    None => {
                        let g = coords.len() as u32;
                        let x = [
                            pa[0] + i as f64 / nf * (pb[0] - pa[0]) + j as f64 / nf * (pc[0] - pa[0]),
                            pa[1] + i as f64 / nf * (pb[1] - pa[1]) + j as f64 / nf * (pc[1] - pa[1]),
                        ];
                        coords.push(x);
                        tags.push(BoundaryTag::Inner);
                        g
                    }
                };
                ids[loc] = id;
            }
        }
        macro_nodes.push(ids);
    }

    let blended: Vec<[f64; 2]> = coords
        .iter()
        .map(|&x| blending.blend(x).expect("lattice node inside domain"))
        .collect();
    let mut surface_nodes = Vec::new();
    let mut cmb_nodes = Vec::new();
    for (i, t) in tags.iter().enumerate() {
        match t {
            BoundaryTag::Surface => surface_nodes.push(i as u32),
            BoundaryTag::Cmb => cmb_nodes.push(i as u32),
            BoundaryTag::Inner => {}
        }
    }
    Lattice {
        level,
        n,
        node_count: coords.len(),
        macro_nodes,
        coords,
        blended,
        tags,
        surface_nodes,
        cmb_nodes,
    }
}

fn classify(i: usize, j: usize, n: usize, va: usize, vb: usize, vc: usize) -> Option<EntityKey> {
    match (i, j) {
        (0, 0) => Some(EntityKey::Vertex(va)),
        (i, 0) if i == n => Some(EntityKey::Vertex(vb)),
        (0, j) if j == n => Some(EntityKey::Vertex(vc)),
        (i, 0) => Some(canonical_edge(va, vb, i, n)),
        (0, j) => Some(canonical_edge(va, vc, j, n)),
        (i, j) if i + j == n => Some(canonical_edge(vb, vc, j, n)),
        _ => None,
    }
}

fn canonical_edge(from: usize, to: usize, k: usize, n: usize) -> EntityKey {
    if from < to {
        EntityKey::Edge(from, to, k)
    } else {
        EntityKey::Edge(to, from, n - k)
    }
}

fn entity_position(macro_mesh: &MacroMesh, key: &EntityKey, n: usize) -> ([f64; 2], BoundaryTag) {
    match *key {
        EntityKey::Vertex(v) => (macro_mesh.vertices[v], macro_mesh.vertex_tags[v]),
        EntityKey::Edge(lo, hi, k) => {
            let (a, b) = (macro_mesh.vertices[lo], macro_mesh.vertices[hi]);
            let t = k as f64 / n as f64;
            let xy = [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])];
            (xy, macro_mesh.edge_tags[&(lo, hi)])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_annulus_macro_mesh;

    fn annulus(level: usize) -> Arc<RefinedMesh> {
        let m = build_annulus_macro_mesh(8, 2, 1.2037, 2.2037).unwrap();
        RefinedMesh::build(m, level)
    }

    #[test]
    fn element_counts_follow_4_pow_l() {
        let m = build_annulus_macro_mesh(3, 1, 0.5, 1.5).unwrap();
        let mesh = RefinedMesh::build(m, 3);
        assert_eq!(mesh.element_count(0), 6);
        assert_eq!(mesh.element_count(3), 6 * 64);
    }

    #[test]
    fn p2_count_matches_vertex_plus_edge_count() {
        let mesh = annulus(3);
        for level in 0..=2usize {
            // Count unique edges of the level mesh directly.
            let mut edges = std::collections::HashSet::new();
            for ids in mesh.p1_element_nodes(level) {
                for k in 0..3 {
                    let (a, b) = (ids[k], ids[(k + 1) % 3]);
                    edges.insert((a.min(b), a.max(b)));
                }
            }
            let v = mesh.p1_node_count(level);
            let e = edges.len();
            assert_eq!(mesh.p2_node_count(level), v + e, "level {level}");
            // Euler on the annulus: V - E + F = 0.
            assert_eq!(
                v as i64 - e as i64 + mesh.element_count(level) as i64,
                0,
                "Euler characteristic, level {level}"
            );
        }
    }

    #[test]
    fn micro_areas_positive_and_congruent_per_macro() {
        let mesh = annulus(3);
        for level in 0..=3usize {
            let mut per_macro: HashMap<u32, f64> = HashMap::new();
            for (e, ids) in mesh.p1_element_nodes(level).iter().enumerate() {
                let c = &mesh.lattice(level).coords;
                let (p, q, r) = (
                    c[ids[0] as usize],
                    c[ids[1] as usize],
                    c[ids[2] as usize],
                );
                let area =
                    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]));
                assert!(area > 0.0, "element {e} at level {level}");
                let m = mesh.elements(level)[e].macro_idx;
                let reference = *per_macro.entry(m).or_insert(area);
                assert!((area - reference).abs() <= 1e-12 * reference);
            }
        }
    }

    #[test]
    fn boundary_nodes_land_on_circles() {
        let mesh = annulus(4);
        for level in 0..=5usize {
            let lat = mesh.lattice(level);
            for &nid in &lat.surface_nodes {
                let b = lat.blended[nid as usize];
                let r = (b[0] * b[0] + b[1] * b[1]).sqrt();
                assert!((r - 2.2037).abs() < 1e-13 * 2.2037);
            }
            for &nid in &lat.cmb_nodes {
                let b = lat.blended[nid as usize];
                let r = (b[0] * b[0] + b[1] * b[1]).sqrt();
                assert!((r - 1.2037).abs() < 1e-13 * 1.2037);
            }
        }
    }

    #[test]
    fn coarse_nodes_nest_bitwise_into_fine_nodes() {
        let mesh = annulus(3);
        for level in 0..=3usize {
            let coarse = mesh.lattice(level);
            let fine = mesh.lattice(level + 1);
            for m in 0..mesh.macro_mesh.triangles.len() {
                let n = coarse.n;
                for j in 0..=n {
                    for i in 0..=(n - j) {
                        let c = coarse.coords[coarse.node(m, i, j) as usize];
                        let f = fine.coords[fine.node(m, 2 * i, 2 * j) as usize];
                        assert_eq!(c, f);
                    }
                }
            }
        }
    }

    #[test]
    fn diameters_halve_under_refinement() {
        let mesh = annulus(3);
        let h0 = mesh.element_diameter(0, 0);
        let h1 = mesh.element_diameter(1, 0);
        assert!((h0 / h1 - 2.0).abs() < 1e-12);

        // Unit right triangle check via a synthetic macro mesh is covered by
        // construction; here verify the min matches a brute-force scan.
        let min_scan = (0..mesh.element_count(2))
            .map(|e| mesh.element_diameter(2, e))
            .fold(f64::INFINITY, f64::min);
        assert_eq!(min_scan, mesh.min_diameter(2));
    }

    #[test]
    fn locate_finds_the_right_element() {
        let mesh = annulus(3);
        let level = 3;
        // Sample interior physical points; verify the located element's
        // blended corners contain the point (via reference coordinates).
        let mut rng = 7u64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..500 {
            let th = next() * 2.0 * std::f64::consts::PI;
            let r = 1.2137 + next() * 0.98;
            let x = [r * th.cos(), r * th.sin()];
            let (e, xi) = mesh.locate(level, x).unwrap();
            assert!(e < mesh.element_count(level));
            assert!(xi[0] >= -1e-10 && xi[1] >= -1e-10 && xi[0] + xi[1] <= 1.0 + 1e-10);
            // Reconstruct the unblended point from reference coordinates.
            let corners = mesh.element_corners(level, e);
            let xt = [
                corners[0][0]
                    + xi[0] * (corners[1][0] - corners[0][0])
                    + xi[1] * (corners[2][0] - corners[0][0]),
                corners[0][1]
                    + xi[0] * (corners[1][1] - corners[0][1])
                    + xi[1] * (corners[2][1] - corners[0][1]),
            ];
            let back = mesh.blending.blend(xt).unwrap();
            assert!(
                (back[0] - x[0]).abs() < 1e-10 && (back[1] - x[1]).abs() < 1e-10,
                "round trip failed at {x:?}"
            );
        }
    }

    #[test]
    fn locate_rejects_outside_points() {
        let mesh = annulus(2);
        assert!(mesh.locate(2, [2.4, 0.0]).is_err());
        assert!(mesh.locate(2, [0.0, 0.0]).is_err());
    }
}
