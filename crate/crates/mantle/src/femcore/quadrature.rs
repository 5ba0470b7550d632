//! Symmetric Gauss rules on the reference triangle (0,0)-(1,0)-(0,1).
//!
//! Two rules cover all bilinear forms: degree-6 exactness for the viscous
//! block, masses and the energy operator (degree-2 basis products modulated
//! by smooth coefficients), degree-4 for divergence/gradient couplings.

use std::sync::OnceLock;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RuleKind {
    Degree4 = 0,
    Degree6 = 1,
}

pub const RULE_COUNT: usize = 2;

/// Quadrature points and weights; weights sum to the reference area 1/2.
pub struct QuadratureRule {
    pub degree: usize,
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }
}

/// Appends the 3 points of a (a, a, b) orbit, barycentric weight `w`.
fn orbit3(points: &mut Vec<[f64; 2]>, weights: &mut Vec<f64>, w: f64, a: f64) {
    let b = 1.0 - 2.0 * a;
    // (l0, l1, l2) -> (x, y) = (l1, l2)
    points.push([a, b]);
    points.push([b, a]);
    points.push([a, a]);
    weights.extend_from_slice(&[0.5 * w; 3]);
}

/// Appends the 6 points of an (a, b, c) orbit.
fn orbit6(points: &mut Vec<[f64; 2]>, weights: &mut Vec<f64>, w: f64, a: f64, b: f64) {
    let c = 1.0 - a - b;
    for (l1, l2) in [(b, c), (c, b), (a, c), (c, a), (a, b), (b, a)] {
        points.push([l1, l2]);
        weights.push(0.5 * w);
    }
}

fn degree4() -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    orbit3(&mut points, &mut weights, 0.223381589678011, 0.445948490915965);
    orbit3(&mut points, &mut weights, 0.109951743655322, 0.091576213509771);
    QuadratureRule {
        degree: 4,
        points,
        weights,
    }
}

fn degree6() -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    orbit3(&mut points, &mut weights, 0.116786275726379, 0.249286745170910);
    orbit3(&mut points, &mut weights, 0.050844906370207, 0.063089014491502);
    orbit6(
        &mut points,
        &mut weights,
        0.082851075618374,
        0.053145049844816,
        0.310352451033785,
    );
    QuadratureRule {
        degree: 6,
        points,
        weights,
    }
}

pub fn rule(kind: RuleKind) -> &'static QuadratureRule {
    static D4: OnceLock<QuadratureRule> = OnceLock::new();
    static D6: OnceLock<QuadratureRule> = OnceLock::new();
    match kind {
        RuleKind::Degree4 => D4.get_or_init(degree4),
        RuleKind::Degree6 => D6.get_or_init(degree6),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^p y^q over the reference triangle: p! q! / (p+q+2)!.
    fn monomial_integral(p: u32, q: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>().max(1.0);
        fact(p) * fact(q) / fact(p + q + 2)
    }

    fn check_exactness(kind: RuleKind) {
        let r = rule(kind);
        let sum: f64 = r.weights.iter().sum();
        assert!((sum - 0.5).abs() < 1e-14, "weights sum to area, got {sum}");
        for p in 0..=r.degree as u32 {
            for q in 0..=(r.degree as u32 - p) {
                let quad: f64 = r
                    .points
                    .iter()
                    .zip(&r.weights)
                    .map(|(pt, w)| w * pt[0].powi(p as i32) * pt[1].powi(q as i32))
                    .sum();
                let exact = monomial_integral(p, q);
                assert!(
                    (quad - exact).abs() < 1e-14,
                    "{kind:?} fails on x^{p} y^{q}: {quad} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn degree4_is_exact() {
        check_exactness(RuleKind::Degree4);
    }

    #[test]
    fn degree6_is_exact() {
        check_exactness(RuleKind::Degree6);
    }
}
