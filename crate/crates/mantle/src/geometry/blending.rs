//! Blending map from the polygonal annulus onto the circular annulus.
//!
//! For a point x in radial layer l of the polygonal domain, the map keeps the
//! polar angle and replaces the radius: the radial fraction s of the point
//! between the inner and outer polygon chords of its layer (measured along
//! the ray through the point) is mapped onto the same fraction between the
//! exact circle radii of the layer boundaries,
//!
//! ```text
//! B(x) = (R_l + s (R_{l+1} - R_l)) * x / |x|.
//! ```
//!
//! Within one polygon sector the chord distance along the ray is x . n / cos
//! with n the outward edge normal, so s is an affine function of x and the
//! Jacobian has the closed form
//!
//! ```text
//! J_B = e_r (grad g)^T + (g / |x|) (I - e_r e_r^T),   g = R_l + s dR,
//! ```
//!
//! with det J_B = (grad g . e_r) (g / |x|) > 0.

use super::{GeometryError, MacroMesh};

/// Angle-preserving map from the refined polygonal mesh onto the annulus.
#[derive(Clone, Debug)]
pub struct BlendingMap {
    n_tangential: usize,
    /// Circle radii of the layer boundaries (= polygon ring circumradii).
    ring_radii: Vec<f64>,
    /// Apothems of the polygon rings (distance of chords from the origin).
    apothems: Vec<f64>,
    /// Unit outward normal of each polygon sector edge.
    sector_normals: Vec<[f64; 2]>,
    /// Identity-map hook: when false the map is the identity.
    enabled: bool,
}

impl BlendingMap {
    pub fn new(mesh: &MacroMesh) -> Self {
        Self::from_parameters(mesh.n_tangential, mesh.ring_radii())
    }

    pub fn from_parameters(n_tangential: usize, ring_radii: Vec<f64>) -> Self {
        let n = n_tangential;
        let cos_half = (std::f64::consts::PI / n as f64).cos();
        let apothems = ring_radii.iter().map(|r| r * cos_half).collect();
        let sector_normals = (0..n)
            .map(|i| {
                let phi = 2.0 * std::f64::consts::PI * (i as f64 + 0.5) / n as f64;
                [phi.cos(), phi.sin()]
            })
            .collect();
        BlendingMap {
            n_tangential,
            ring_radii,
            apothems,
            sector_normals,
            enabled: true,
        }
    }

    /// Degenerate identity configuration (blending disabled).
    pub fn identity(mesh: &MacroMesh) -> Self {
        let mut map = Self::new(mesh);
        map.enabled = false;
        map
    }

    pub fn is_identity(&self) -> bool {
        !self.enabled
    }

    pub fn n_layers(&self) -> usize {
        self.ring_radii.len() - 1
    }

    pub fn r_cmb(&self) -> f64 {
        self.ring_radii[0]
    }

    pub fn r_surface(&self) -> f64 {
        *self.ring_radii.last().unwrap()
    }

    /// Sector index of the polygon edge under the direction of `x`.
    fn sector(&self, x: [f64; 2]) -> usize {
        let theta = x[1].atan2(x[0]).rem_euclid(2.0 * std::f64::consts::PI);
        let w = 2.0 * std::f64::consts::PI / self.n_tangential as f64;
        ((theta / w) as usize).min(self.n_tangential - 1)
    }

    /// Maps a point of polygonal layer `layer` onto the circular annulus.
    pub fn blend_in_layer(&self, layer: usize, x: [f64; 2]) -> [f64; 2] {
        if !self.enabled {
            return x;
        }
        let n = self.sector_normals[self.sector(x)];
        let q = x[0] * n[0] + x[1] * n[1];
        let (a0, a1) = (self.apothems[layer], self.apothems[layer + 1]);
        let (r0, r1) = (self.ring_radii[layer], self.ring_radii[layer + 1]);
        let s = (q - a0) / (a1 - a0);
        let g = r0 + s * (r1 - r0);
        let rt = (x[0] * x[0] + x[1] * x[1]).sqrt();
        [g * x[0] / rt, g * x[1] / rt]
    }

    /// Jacobian of `blend_in_layer` and its determinant.
    pub fn jacobian_in_layer(&self, layer: usize, x: [f64; 2]) -> ([[f64; 2]; 2], f64) {
        if !self.enabled {
            return ([[1.0, 0.0], [0.0, 1.0]], 1.0);
        }
        let n = self.sector_normals[self.sector(x)];
        let q = x[0] * n[0] + x[1] * n[1];
        let (a0, a1) = (self.apothems[layer], self.apothems[layer + 1]);
        let (r0, r1) = (self.ring_radii[layer], self.ring_radii[layer + 1]);
        let slope = (r1 - r0) / (a1 - a0);
        let g = r0 + (q - a0) * slope;
        let rt = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let e = [x[0] / rt, x[1] / rt];
        // grad g = slope * n (constant within the sector).
        let mut jac = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                let id = if r == c { 1.0 } else { 0.0 };
                jac[r][c] = e[r] * slope * n[c] + g / rt * (id - e[r] * e[c]);
            }
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        (jac, det)
    }

    /// Locates the layer of an unblended point and maps it onto the annulus.
    pub fn blend(&self, x: [f64; 2]) -> Result<[f64; 2], GeometryError> {
        let layer = self.locate_layer(x)?;
        Ok(self.blend_in_layer(layer, x))
    }

    /// Jacobian of `blend` at an unblended point.
    pub fn blend_jacobian(&self, x: [f64; 2]) -> Result<([[f64; 2]; 2], f64), GeometryError> {
        let layer = self.locate_layer(x)?;
        Ok(self.jacobian_in_layer(layer, x))
    }

    fn locate_layer(&self, x: [f64; 2]) -> Result<usize, GeometryError> {
        // The unblended domain is polygonal in either configuration.
        let n = self.sector_normals[self.sector(x)];
        let q = x[0] * n[0] + x[1] * n[1];
        self.layer_of_fraction(q, &self.apothems)
            .ok_or(GeometryError::OutsideDomain(x[0], x[1]))
    }

    fn layer_of_fraction(&self, q: f64, brackets: &[f64]) -> Option<usize> {
        let tol = 1e-12 * brackets[brackets.len() - 1];
        if q < brackets[0] - tol || q > brackets[brackets.len() - 1] + tol {
            return None;
        }
        for l in 0..brackets.len() - 1 {
            if q <= brackets[l + 1] + tol {
                return Some(l);
            }
        }
        Some(brackets.len() - 2)
    }

    /// Analytic inverse: maps a point of the circular annulus back onto the
    /// polygonal domain (angle kept, radial fraction inverted). Returns None
    /// for points outside the shell.
    pub fn unblend(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        if !self.enabled {
            self.locate_layer(x).ok()?;
            return Some(x);
        }
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let layer = self.layer_of_fraction(r, &self.ring_radii)?;
        let (r0, r1) = (self.ring_radii[layer], self.ring_radii[layer + 1]);
        let (a0, a1) = (self.apothems[layer], self.apothems[layer + 1]);
        let s = (r - r0) / (r1 - r0);
        let q = a0 + s * (a1 - a0);
        let n = self.sector_normals[self.sector(x)];
        let cos_delta = (x[0] * n[0] + x[1] * n[1]) / r;
        let rt = q / cos_delta;
        Some([rt * x[0] / r, rt * x[1] / r])
    }

    /// Pulls a physical point just inside the domain (distance `eps` from
    /// the boundary along the inward direction): radially for the blended
    /// annulus, along the sector normal for the identity (polygon) map.
    pub fn clamp_inward(&self, x: [f64; 2], eps: f64) -> [f64; 2] {
        if self.enabled {
            let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
            let c = r.clamp(self.r_cmb() + eps, self.r_surface() - eps);
            if c == r {
                x
            } else {
                [x[0] * c / r, x[1] * c / r]
            }
        } else {
            let n = self.sector_normals[self.sector(x)];
            let q = x[0] * n[0] + x[1] * n[1];
            let lo = self.apothems[0] + eps;
            let hi = self.apothems[self.apothems.len() - 1] - eps;
            let c = q.clamp(lo, hi);
            if c == q || q <= 0.0 {
                x
            } else {
                [x[0] * c / q, x[1] * c / q]
            }
        }
    }

    /// Layer index of a physical (blended) point.
    pub fn physical_layer(&self, x: [f64; 2]) -> Option<usize> {
        if !self.enabled {
            return self.locate_layer(x).ok();
        }
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        self.layer_of_fraction(r, &self.ring_radii)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_annulus_macro_mesh;

    fn map() -> BlendingMap {
        let mesh = build_annulus_macro_mesh(8, 2, 1.2037, 2.2037).unwrap();
        BlendingMap::new(&mesh)
    }

    #[test]
    fn outer_edge_midpoint_lands_on_circle() {
        let m = map();
        // Midpoint of the outer polygon edge between sectors 0 and 1.
        let r = 2.2037;
        let v0 = [r, 0.0];
        let th = 2.0 * std::f64::consts::PI / 8.0;
        let v1 = [r * th.cos(), r * th.sin()];
        let mid = [0.5 * (v0[0] + v1[0]), 0.5 * (v0[1] + v1[1])];
        let y = m.blend(mid).unwrap();
        let ry = (y[0] * y[0] + y[1] * y[1]).sqrt();
        assert!((ry - r).abs() < 1e-13 * r);
    }

    #[test]
    fn polygon_corner_is_fixed() {
        let m = map();
        let th = 2.0 * std::f64::consts::PI * 3.0 / 8.0;
        let v = [2.2037 * th.cos(), 2.2037 * th.sin()];
        let y = m.blend(v).unwrap();
        assert!((y[0] - v[0]).abs() < 1e-13);
        assert!((y[1] - v[1]).abs() < 1e-13);
    }

    #[test]
    fn angle_preserved_and_radius_inside() {
        let m = map();
        let x = [1.4, 0.6];
        let y = m.blend(x).unwrap();
        let (ta, tb) = (x[1].atan2(x[0]), y[1].atan2(y[0]));
        assert!((ta - tb).abs() < 1e-14);
        let ry = (y[0] * y[0] + y[1] * y[1]).sqrt();
        assert!(ry > 1.2037 && ry < 2.2037);
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let m = map();
        let mut worst: f64 = 0.0;
        let mut rng = 987_654_321u64;
        let mut next = move || {
            // xorshift64*
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut tested = 0;
        while tested < 100 {
            let th = next() * 2.0 * std::f64::consts::PI;
            let r = 1.25 + next() * 0.9;
            let x = [r * th.cos(), r * th.sin()];
            let layer = match m.locate_layer(x) {
                Ok(l) => l,
                Err(_) => continue,
            };
            // Skip points too close to sector/layer joints where the central
            // difference straddles a C^0 kink of the map.
            let n = m.sector_normals[m.sector(x)];
            let q = x[0] * n[0] + x[1] * n[1];
            if (q - m.apothems[layer]).abs() < 1e-4 || (m.apothems[layer + 1] - q).abs() < 1e-4 {
                continue;
            }
            let h = 1e-6;
            let (jac, det) = m.jacobian_in_layer(layer, x);
            assert!(det > 0.0);
            for c in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[c] += h;
                xm[c] -= h;
                if m.sector(xp) != m.sector(x) || m.sector(xm) != m.sector(x) {
                    continue;
                }
                let yp = m.blend_in_layer(layer, xp);
                let ym = m.blend_in_layer(layer, xm);
                for r in 0..2 {
                    let fd = (yp[r] - ym[r]) / (2.0 * h);
                    worst = worst.max((fd - jac[r][c]).abs());
                }
            }
            tested += 1;
        }
        assert!(worst < 1e-6, "worst fd mismatch {worst}");
    }

    #[test]
    fn identity_configuration() {
        let mesh = build_annulus_macro_mesh(8, 2, 1.2037, 2.2037).unwrap();
        let m = BlendingMap::identity(&mesh);
        let x = [1.5, 0.3];
        assert_eq!(m.blend(x).unwrap(), x);
        let (j, det) = m.blend_jacobian(x).unwrap();
        assert_eq!(j, [[1.0, 0.0], [0.0, 1.0]]);
        assert_eq!(det, 1.0);
    }

    #[test]
    fn unblend_is_inverse() {
        let m = map();
        let mut rng = 42u64;
        let mut next = move || {
            rng ^= rng << 13;
            rng ^= rng >> 7;
            rng ^= rng << 17;
            (rng >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..200 {
            let th = next() * 2.0 * std::f64::consts::PI;
            let r = 1.21 + next() * 0.98;
            let x = [r * th.cos(), r * th.sin()];
            if m.locate_layer(x).is_err() {
                continue;
            }
            let y = m.blend(x).unwrap();
            let back = m.unblend(y).unwrap();
            assert!((back[0] - x[0]).abs() < 1e-12 && (back[1] - x[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn outside_point_is_rejected() {
        let m = map();
        assert!(m.blend([3.0, 0.0]).is_err());
        assert!(m.unblend([2.2037 + 0.1, 0.0]).is_none());
    }
}
