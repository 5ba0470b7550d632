//! Point evaluation (through the analytic inverse of the blending map) and
//! quadrature of fields over the blended domain.

use super::basis;
use super::quadrature::RuleKind;
use super::FieldFunction;
use crate::geometry::RefinedMesh;

pub fn evaluate_p2_scalar(
    mesh: &RefinedMesh,
    level: usize,
    coeffs: &[f64],
    x: [f64; 2],
) -> Option<f64> {
    let (e, xi) = mesh.locate(level, x).ok()?;
    let ids = &mesh.p2_element_nodes(level)[e];
    let vals = basis::p2_values(xi[0], xi[1]);
    let mut acc = 0.0;
    for k in 0..6 {
        acc += coeffs[ids[k] as usize] * vals[k];
    }
    Some(acc)
}

pub fn evaluate_p2_vector(
    mesh: &RefinedMesh,
    level: usize,
    coeffs: &[f64],
    x: [f64; 2],
) -> Option<[f64; 2]> {
    let (e, xi) = mesh.locate(level, x).ok()?;
    let ids = &mesh.p2_element_nodes(level)[e];
    let vals = basis::p2_values(xi[0], xi[1]);
    let mut acc = [0.0; 2];
    for k in 0..6 {
        acc[0] += coeffs[2 * ids[k] as usize] * vals[k];
        acc[1] += coeffs[2 * ids[k] as usize + 1] * vals[k];
    }
    Some(acc)
}

pub fn evaluate_p1(mesh: &RefinedMesh, level: usize, coeffs: &[f64], x: [f64; 2]) -> Option<f64> {
    let (e, xi) = mesh.locate(level, x).ok()?;
    let ids = &mesh.p1_element_nodes(level)[e];
    let vals = basis::p1_values(xi[0], xi[1]);
    let mut acc = 0.0;
    for k in 0..3 {
        acc += coeffs[ids[k] as usize] * vals[k];
    }
    Some(acc)
}

/// Quadrature of a field over the blended domain.
pub fn integrate(f: &FieldFunction) -> f64 {
    let mesh = &f.space.mesh;
    let level = f.space.level;
    let geo = mesh.geometry(level, RuleKind::Degree6);
    let bt = basis::tables(RuleKind::Degree6);
    let mut acc = 0.0;
    match f.space.kind {
        super::SpaceKind::P1Scalar => {
            let p1 = mesh.p1_element_nodes(level);
            for (e, ids) in p1.iter().enumerate() {
                let loc = [
                    f.coeffs[ids[0] as usize],
                    f.coeffs[ids[1] as usize],
                    f.coeffs[ids[2] as usize],
                ];
                for q in 0..geo.n_qp {
                    let (_, _, _, w) = geo.at(e, q);
                    let psi = &bt.p1_vals[q];
                    acc += w * (loc[0] * psi[0] + loc[1] * psi[1] + loc[2] * psi[2]);
                }
            }
        }
        super::SpaceKind::P2Scalar => {
            let p2 = mesh.p2_element_nodes(level);
            for (e, ids) in p2.iter().enumerate() {
                let mut loc = [0.0; 6];
                for k in 0..6 {
                    loc[k] = f.coeffs[ids[k] as usize];
                }
                for q in 0..geo.n_qp {
                    let (_, _, _, w) = geo.at(e, q);
                    let phi = &bt.p2_vals[q];
                    let mut v = 0.0;
                    for k in 0..6 {
                        v += loc[k] * phi[k];
                    }
                    acc += w * v;
                }
            }
        }
        super::SpaceKind::P2Vector => panic!("integrate is defined for scalar fields"),
    }
    acc
}

/// Area of the blended domain at the quadrature resolution of `level`.
pub fn domain_area(mesh: &RefinedMesh, level: usize) -> f64 {
    let geo = mesh.geometry(level, RuleKind::Degree6);
    geo.w.iter().sum()
}

/// Quadrature of a pointwise function over the blended domain.
pub fn integrate_fn(mesh: &RefinedMesh, level: usize, f: impl Fn([f64; 2]) -> f64) -> f64 {
    let geo = mesh.geometry(level, RuleKind::Degree6);
    let mut acc = 0.0;
    for (x, w) in geo.x.iter().zip(&geo.w) {
        acc += w * f(*x);
    }
    acc
}
