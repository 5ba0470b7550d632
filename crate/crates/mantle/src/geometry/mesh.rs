//! Macro (coarse) mesh of the hollow polygonal annulus.

use super::GeometryError;
use std::collections::HashMap;

/// Classification of mesh entities relative to the annulus boundaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryTag {
    /// Interior of the domain.
    Inner,
    /// Outer boundary (planet surface).
    Surface,
    /// Inner boundary (core-mantle boundary).
    Cmb,
}

/// Unstructured coarse mesh: a hollow regular polygon divided into layers of
/// congruent isosceles trapezoids, each split into two triangles.
#[derive(Clone, Debug)]
pub struct MacroMesh {
    /// Vertex coordinates in the unblended (polygonal) domain.
    pub vertices: Vec<[f64; 2]>,
    /// Triangles as vertex index triples, counter-clockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary tag per vertex.
    pub vertex_tags: Vec<BoundaryTag>,
    /// Boundary tag per undirected edge (sorted vertex pair).
    pub edge_tags: HashMap<(usize, usize), BoundaryTag>,
    /// Radial layer index of each triangle (0 = innermost).
    pub triangle_layer: Vec<usize>,
    /// Number of polygon sides.
    pub n_tangential: usize,
    /// Number of radial layers.
    pub n_radial: usize,
    /// Inner radius (nondimensional).
    pub r_cmb: f64,
    /// Outer radius (nondimensional).
    pub r_surface: f64,
}

impl MacroMesh {
    /// Circumradii of the polygon rings, innermost first (length n_radial + 1).
    pub fn ring_radii(&self) -> Vec<f64> {
        let dr = (self.r_surface - self.r_cmb) / self.n_radial as f64;
        (0..=self.n_radial)
            .map(|j| self.r_cmb + j as f64 * dr)
            .collect()
    }

    /// Signed area of triangle `t` (positive for counter-clockwise).
    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]))
    }
}

/// Builds the hollow regular-polygon macro mesh of the annulus.
///
/// The polygon with `n_tangential` sides is divided into `n_radial` layers of
/// equal height between the rings of circumradius `r_cmb` and `r_surface`;
/// each trapezoid cell is split into two triangles along a consistent
/// diagonal, so all triangles within a layer are congruent.
pub fn build_annulus_macro_mesh(
    n_tangential: usize,
    n_radial: usize,
    r_cmb: f64,
    r_surface: f64,
) -> Result<MacroMesh, GeometryError> {
    if n_tangential < 3 {
        return Err(GeometryError::InvalidGeometry(format!(
            "n_tangential = {n_tangential}, need at least 3 polygon sides"
        )));
    }
    if n_radial < 1 {
        return Err(GeometryError::InvalidGeometry(
            "n_radial must be at least 1".into(),
        ));
    }
    if !(r_cmb > 0.0) || !(r_surface > r_cmb) {
        return Err(GeometryError::InvalidGeometry(format!(
            "need 0 < r_cmb < r_surface, got r_cmb = {r_cmb}, r_surface = {r_surface}"
        )));
    }

    let nt = n_tangential;
    let nr = n_radial;
    let dr = (r_surface - r_cmb) / nr as f64;

    // Ring-major vertex layout: vertex (ring j, sector i) at index j * nt + i.
    let mut vertices = Vec::with_capacity((nr + 1) * nt);
    let mut vertex_tags = Vec::with_capacity((nr + 1) * nt);
    for j in 0..=nr {
        let r = r_cmb + j as f64 * dr;
        let tag = if j == 0 {
            BoundaryTag::Cmb
        } else if j == nr {
            BoundaryTag::Surface
        } else {
            BoundaryTag::Inner
        };
        for i in 0..nt {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / nt as f64;
            vertices.push([r * theta.cos(), r * theta.sin()]);
            vertex_tags.push(tag);
        }
    }

    let vid = |j: usize, i: usize| j * nt + (i % nt);
    let mut triangles = Vec::with_capacity(2 * nr * nt);
    let mut triangle_layer = Vec::with_capacity(2 * nr * nt);
    for j in 0..nr {
        for i in 0..nt {
            let (v00, v10) = (vid(j, i), vid(j, i + 1));
            let (v01, v11) = (vid(j + 1, i), vid(j + 1, i + 1));
            // Diagonal v00 -- v11 splits the trapezoid; both triangles CCW.
            triangles.push([v00, v11, v10]);
            triangle_layer.push(j);
            triangles.push([v00, v01, v11]);
            triangle_layer.push(j);
        }
    }

    let mut edge_tags: HashMap<(usize, usize), BoundaryTag> = HashMap::new();
    let mut put = |a: usize, b: usize, tag: BoundaryTag| {
        edge_tags.insert((a.min(b), a.max(b)), tag);
    };
    for j in 0..=nr {
        let tag = if j == 0 {
            BoundaryTag::Cmb
        } else if j == nr {
            BoundaryTag::Surface
        } else {
            BoundaryTag::Inner
        };
        for i in 0..nt {
            put(vid(j, i), vid(j, i + 1), tag);
        }
    }
    for j in 0..nr {
        for i in 0..nt {
            put(vid(j, i), vid(j + 1, i), BoundaryTag::Inner);
            put(vid(j, i), vid(j + 1, i + 1), BoundaryTag::Inner);
        }
    }

    let mesh = MacroMesh {
        vertices,
        triangles,
        vertex_tags,
        edge_tags,
        triangle_layer,
        n_tangential,
        n_radial,
        r_cmb,
        r_surface,
    };
    for t in 0..mesh.triangles.len() {
        debug_assert!(mesh.signed_area(t) > 0.0);
    }
    Ok(mesh)
}
