//! Lagrange basis functions on the reference triangle.
//!
//! Local node ordering: vertices (0,0), (1,0), (0,1), then edge midpoints
//! 01, 12, 02. Degree-1 elements use the first three.

use super::quadrature::{rule, QuadratureRule, RuleKind};
use std::sync::OnceLock;

pub const P1_GRADS: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

pub fn p1_values(x: f64, y: f64) -> [f64; 3] {
    [1.0 - x - y, x, y]
}

pub fn p2_values(x: f64, y: f64) -> [f64; 6] {
    let l0 = 1.0 - x - y;
    [
        l0 * (2.0 * l0 - 1.0),
        x * (2.0 * x - 1.0),
        y * (2.0 * y - 1.0),
        4.0 * l0 * x,
        4.0 * x * y,
        4.0 * l0 * y,
    ]
}

pub fn p2_gradients(x: f64, y: f64) -> [[f64; 2]; 6] {
    let l0 = 1.0 - x - y;
    [
        [-(4.0 * l0 - 1.0), -(4.0 * l0 - 1.0)],
        [4.0 * x - 1.0, 0.0],
        [0.0, 4.0 * y - 1.0],
        [4.0 * (l0 - x), -4.0 * x],
        [4.0 * y, 4.0 * x],
        [-4.0 * y, 4.0 * (l0 - y)],
    ]
}

/// Basis values and reference gradients tabulated at the points of a rule.
pub struct BasisTables {
    pub rule: &'static QuadratureRule,
    pub p1_vals: Vec<[f64; 3]>,
    pub p2_vals: Vec<[f64; 6]>,
    pub p2_grads: Vec<[[f64; 2]; 6]>,
}

fn build_tables(kind: RuleKind) -> BasisTables {
    let r = rule(kind);
    BasisTables {
        rule: r,
        p1_vals: r.points.iter().map(|p| p1_values(p[0], p[1])).collect(),
        p2_vals: r.points.iter().map(|p| p2_values(p[0], p[1])).collect(),
        p2_grads: r.points.iter().map(|p| p2_gradients(p[0], p[1])).collect(),
    }
}

pub fn tables(kind: RuleKind) -> &'static BasisTables {
    static D4: OnceLock<BasisTables> = OnceLock::new();
    static D6: OnceLock<BasisTables> = OnceLock::new();
    match kind {
        RuleKind::Degree4 => D4.get_or_init(|| build_tables(RuleKind::Degree4)),
        RuleKind::Degree6 => D6.get_or_init(|| build_tables(RuleKind::Degree6)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_kronecker() {
        let nodes = [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.5, 0.0],
            [0.5, 0.5],
            [0.0, 0.5],
        ];
        for (i, n) in nodes.iter().enumerate() {
            let vals = p2_values(n[0], n[1]);
            for (j, v) in vals.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-15, "phi_{j} at node {i}");
            }
        }
        let v = p2_values(0.31, 0.17);
        assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-7;
        let (x, y) = (0.23, 0.41);
        let g = p2_gradients(x, y);
        let vxp = p2_values(x + h, y);
        let vxm = p2_values(x - h, y);
        let vyp = p2_values(x, y + h);
        let vym = p2_values(x, y - h);
        for k in 0..6 {
            assert!(((vxp[k] - vxm[k]) / (2.0 * h) - g[k][0]).abs() < 1e-6);
            assert!(((vyp[k] - vym[k]) / (2.0 * h) - g[k][1]).abs() < 1e-6);
        }
    }
}
