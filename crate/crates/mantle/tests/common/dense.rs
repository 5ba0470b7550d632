//! Independent dense assembly of the weak forms, plus dense linear algebra.

use mantle::femcore::quadrature::{rule, RuleKind};
use mantle::geometry::RefinedMesh;

#[derive(Clone)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for r in 0..self.rows {
            let row = &self.data[r * self.cols..(r + 1) * self.cols];
            y[r] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        y
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.at(r, c)).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.at(r, c);
            }
        }
        t
    }

    /// Solves A x = b by LU with partial pivoting (A square).
    pub fn lu_solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut x = b.to_vec();
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut p = k;
            let mut best = a[piv[k] * n + k].abs();
            for r in k + 1..n {
                let v = a[piv[r] * n + k].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            piv.swap(k, p);
            let pk = piv[k];
            let akk = a[pk * n + k];
            assert!(akk.abs() > 1e-300, "singular matrix in lu_solve");
            for r in k + 1..n {
                let pr = piv[r];
                let f = a[pr * n + k] / akk;
                a[pr * n + k] = f;
                for c in k + 1..n {
                    a[pr * n + c] -= f * a[pk * n + c];
                }
            }
        }
        // Forward substitution on the permuted rows.
        let mut y = vec![0.0; n];
        for r in 0..n {
            let pr = piv[r];
            let mut s = x[pr];
            for c in 0..r {
                s -= a[pr * n + c] * y[c];
            }
            y[r] = s;
        }
        for r in (0..n).rev() {
            let pr = piv[r];
            let mut s = y[r];
            for c in r + 1..n {
                s -= a[pr * n + c] * x[c];
            }
            x[r] = s / a[pr * n + r];
        }
        x
    }
}

/// Barycentric re-derivation of the quadratic basis (independent of the
/// library's tables).
fn shape_p2(l: [f64; 3], k: usize) -> f64 {
    match k {
        0 | 1 | 2 => l[k] * (2.0 * l[k] - 1.0),
        3 => 4.0 * l[0] * l[1],
        4 => 4.0 * l[1] * l[2],
        5 => 4.0 * l[0] * l[2],
        _ => unreachable!(),
    }
}

fn shape_p2_grad_ref(l: [f64; 3], k: usize) -> [f64; 2] {
    // Barycentric gradients on the reference triangle.
    let dl = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
    match k {
        0 | 1 | 2 => {
            let f = 4.0 * l[k] - 1.0;
            [f * dl[k][0], f * dl[k][1]]
        }
        3 => [
            4.0 * (l[1] * dl[0][0] + l[0] * dl[1][0]),
            4.0 * (l[1] * dl[0][1] + l[0] * dl[1][1]),
        ],
        4 => [
            4.0 * (l[2] * dl[1][0] + l[1] * dl[2][0]),
            4.0 * (l[2] * dl[1][1] + l[1] * dl[2][1]),
        ],
        5 => [
            4.0 * (l[2] * dl[0][0] + l[0] * dl[2][0]),
            4.0 * (l[2] * dl[0][1] + l[0] * dl[2][1]),
        ],
        _ => unreachable!(),
    }
}

fn shape_p1(l: [f64; 3], k: usize) -> f64 {
    l[k]
}

const P1_GRAD_REF: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

/// Everything the integrand closures need at one quadrature point.
pub struct QpData {
    pub x: [f64; 2],
    pub weight: f64,
    pub p2_val: [f64; 6],
    pub p2_grad: [[f64; 2]; 6],
    pub p1_val: [f64; 3],
    pub p1_grad: [[f64; 2]; 3],
}

/// Walks all elements/quadrature points of a level, recomputing the
/// pull-back geometry from scratch, and hands per-point data to `visit`.
pub fn for_each_qp(
    mesh: &RefinedMesh,
    level: usize,
    kind: RuleKind,
    mut visit: impl FnMut(usize, &QpData),
) {
    let r = rule(kind);
    for e in 0..mesh.element_count(level) {
        let corners = mesh.element_corners(level, e);
        let layer = mesh.element_layer(level, e);
        let jf = [
            [corners[1][0] - corners[0][0], corners[2][0] - corners[0][0]],
            [corners[1][1] - corners[0][1], corners[2][1] - corners[0][1]],
        ];
        let det_f = jf[0][0] * jf[1][1] - jf[0][1] * jf[1][0];
        for (q, pt) in r.points.iter().enumerate() {
            let l = [1.0 - pt[0] - pt[1], pt[0], pt[1]];
            let xt = [
                corners[0][0] + jf[0][0] * pt[0] + jf[0][1] * pt[1],
                corners[0][1] + jf[1][0] * pt[0] + jf[1][1] * pt[1],
            ];
            let (jb, det_b) = mesh.blending.jacobian_in_layer(layer, xt);
            let x = mesh.blending.blend_in_layer(layer, xt);
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
            let inv_t = [
                [j[1][1] / det, -j[1][0] / det],
                [-j[0][1] / det, j[0][0] / det],
            ];
            let push = |g: [f64; 2]| {
                [
                    inv_t[0][0] * g[0] + inv_t[0][1] * g[1],
                    inv_t[1][0] * g[0] + inv_t[1][1] * g[1],
                ]
            };
            let mut p2_val = [0.0; 6];
            let mut p2_grad = [[0.0; 2]; 6];
            for k in 0..6 {
                p2_val[k] = shape_p2(l, k);
                p2_grad[k] = push(shape_p2_grad_ref(l, k));
            }
            let mut p1_val = [0.0; 3];
            let mut p1_grad = [[0.0; 2]; 3];
            for k in 0..3 {
                p1_val[k] = shape_p1(l, k);
                p1_grad[k] = push(P1_GRAD_REF[k]);
            }
            let data = QpData {
                x,
                weight: r.weights[q] * det_f.abs() * det_b.abs(),
                p2_val,
                p2_grad,
                p1_val,
                p1_grad,
            };
            visit(e, &data);
            let _ = q;
        }
    }
}

/// Deviatoric symmetric gradient of the vector basis function phi_k e_c.
fn dev_eps(g: [f64; 2], comp: usize) -> [[f64; 2]; 2] {
    if comp == 0 {
        [[0.5 * g[0], 0.5 * g[1]], [0.5 * g[1], -0.5 * g[0]]]
    } else {
        [[-0.5 * g[1], 0.5 * g[0]], [0.5 * g[0], 0.5 * g[1]]]
    }
}

fn contract(a: &[[f64; 2]; 2], b: &[[f64; 2]; 2]) -> f64 {
    a[0][0] * b[0][0] + a[0][1] * b[0][1] + a[1][0] * b[1][0] + a[1][1] * b[1][1]
}

/// Dense viscous block: int 2 eta dev(eps(phi_j e_b)) : dev(eps(phi_i e_a)).
pub fn assemble_viscous(
    mesh: &RefinedMesh,
    level: usize,
    eta: impl Fn([f64; 2]) -> f64,
) -> DenseMatrix {
    let n = 2 * mesh.p2_node_count(level);
    let mut m = DenseMatrix::zeros(n, n);
    let p2 = mesh.p2_element_nodes(level);
    for_each_qp(mesh, level, RuleKind::Degree6, |e, qp| {
        let ids = &p2[e];
        let s = 2.0 * eta(qp.x) * qp.weight;
        for i in 0..6 {
            for a in 0..2 {
                let ei = dev_eps(qp.p2_grad[i], a);
                let row = 2 * ids[i] as usize + a;
                for j in 0..6 {
                    for b in 0..2 {
                        let ej = dev_eps(qp.p2_grad[j], b);
                        m.add(row, 2 * ids[j] as usize + b, s * contract(&ej, &ei));
                    }
                }
            }
        }
    });
    m
}

/// Dense divergence rows: -(div phi_j, psi_i) - optional (glr . phi_j, psi_i).
pub fn assemble_divergence(
    mesh: &RefinedMesh,
    level: usize,
    grad_ln_rho: Option<&dyn Fn([f64; 2]) -> [f64; 2]>,
    with_div: bool,
) -> DenseMatrix {
    let np = mesh.p1_node_count(level);
    let nu = 2 * mesh.p2_node_count(level);
    let mut m = DenseMatrix::zeros(np, nu);
    let p2 = mesh.p2_element_nodes(level);
    let p1 = mesh.p1_element_nodes(level);
    for_each_qp(mesh, level, RuleKind::Degree4, |e, qp| {
        let glr = grad_ln_rho.map(|f| f(qp.x));
        for i in 0..3 {
            let row = p1[e][i] as usize;
            let wpsi = qp.weight * qp.p1_val[i];
            for j in 0..6 {
                for b in 0..2 {
                    let mut v = 0.0;
                    if with_div {
                        v -= qp.p2_grad[j][b];
                    }
                    if let Some(g) = glr {
                        v -= g[b] * qp.p2_val[j];
                    }
                    m.add(row, 2 * p2[e][j] as usize + b, wpsi * v);
                }
            }
        }
    });
    m
}

/// Dense gradient block: -(p_j, div phi_i e_a).
pub fn assemble_gradient(mesh: &RefinedMesh, level: usize) -> DenseMatrix {
    let np = mesh.p1_node_count(level);
    let nu = 2 * mesh.p2_node_count(level);
    let mut m = DenseMatrix::zeros(nu, np);
    let p2 = mesh.p2_element_nodes(level);
    let p1 = mesh.p1_element_nodes(level);
    for_each_qp(mesh, level, RuleKind::Degree4, |e, qp| {
        for i in 0..6 {
            for a in 0..2 {
                let row = 2 * p2[e][i] as usize + a;
                for j in 0..3 {
                    m.add(
                        row,
                        p1[e][j] as usize,
                        -qp.weight * qp.p1_val[j] * qp.p2_grad[i][a],
                    );
                }
            }
        }
    });
    m
}

/// Dense vector mass with pointwise coefficient.
pub fn assemble_vector_mass(
    mesh: &RefinedMesh,
    level: usize,
    coeff: impl Fn([f64; 2]) -> f64,
) -> DenseMatrix {
    let n = 2 * mesh.p2_node_count(level);
    let mut m = DenseMatrix::zeros(n, n);
    let p2 = mesh.p2_element_nodes(level);
    for_each_qp(mesh, level, RuleKind::Degree6, |e, qp| {
        let c = coeff(qp.x) * qp.weight;
        for i in 0..6 {
            for j in 0..6 {
                let v = c * qp.p2_val[i] * qp.p2_val[j];
                for a in 0..2 {
                    m.add(
                        2 * p2[e][i] as usize + a,
                        2 * p2[e][j] as usize + a,
                        v,
                    );
                }
            }
        }
    });
    m
}

/// Dense vector mass with a per-element scale on masked elements
/// (the surface boundary-layer weighting).
pub fn assemble_vector_mass_masked(
    mesh: &RefinedMesh,
    level: usize,
    mask: &[bool],
    masked_factor_on_eta: f64,
    sqrt_eta: &dyn Fn([f64; 2]) -> f64,
) -> DenseMatrix {
    let n = 2 * mesh.p2_node_count(level);
    let mut m = DenseMatrix::zeros(n, n);
    let p2 = mesh.p2_element_nodes(level);
    for_each_qp(mesh, level, RuleKind::Degree6, |e, qp| {
        // sqrt(scale^2 * eta) = scale * sqrt(eta)
        let c = if mask[e] {
            masked_factor_on_eta.sqrt() * sqrt_eta(qp.x)
        } else {
            sqrt_eta(qp.x)
        } * qp.weight;
        for i in 0..6 {
            for j in 0..6 {
                let v = c * qp.p2_val[i] * qp.p2_val[j];
                for a in 0..2 {
                    m.add(2 * p2[e][i] as usize + a, 2 * p2[e][j] as usize + a, v);
                }
            }
        }
    });
    m
}

/// Dense pressure mass with pointwise coefficient.
pub fn assemble_pressure_mass(
    mesh: &RefinedMesh,
    level: usize,
    coeff: impl Fn([f64; 2]) -> f64,
) -> DenseMatrix {
    let n = mesh.p1_node_count(level);
    let mut m = DenseMatrix::zeros(n, n);
    let p1 = mesh.p1_element_nodes(level);
    for_each_qp(mesh, level, RuleKind::Degree6, |e, qp| {
        let c = coeff(qp.x) * qp.weight;
        for i in 0..3 {
            for j in 0..3 {
                m.add(
                    p1[e][i] as usize,
                    p1[e][j] as usize,
                    c * qp.p1_val[i] * qp.p1_val[j],
                );
            }
        }
    });
    m
}

/// Dense pressure stiffness with pointwise coefficient.
pub fn assemble_pressure_stiffness(
    mesh: &RefinedMesh,
    level: usize,
    coeff: impl Fn([f64; 2]) -> f64,
) -> DenseMatrix {
    let n = mesh.p1_node_count(level);
    let mut m = DenseMatrix::zeros(n, n);
    let p1 = mesh.p1_element_nodes(level);
    for_each_qp(mesh, level, RuleKind::Degree4, |e, qp| {
        let c = coeff(qp.x) * qp.weight;
        for i in 0..3 {
            for j in 0..3 {
                let g = qp.p1_grad[i][0] * qp.p1_grad[j][0] + qp.p1_grad[i][1] * qp.p1_grad[j][1];
                m.add(p1[e][i] as usize, p1[e][j] as usize, c * g);
            }
        }
    });
    m
}

/// Dense scalar mass / stiffness on the degree-2 space.
pub fn assemble_scalar_mass(mesh: &RefinedMesh, level: usize) -> DenseMatrix {
    let n = mesh.p2_node_count(level);
    let mut m = DenseMatrix::zeros(n, n);
    let p2 = mesh.p2_element_nodes(level);
    for_each_qp(mesh, level, RuleKind::Degree6, |e, qp| {
        for i in 0..6 {
            for j in 0..6 {
                m.add(
                    p2[e][i] as usize,
                    p2[e][j] as usize,
                    qp.weight * qp.p2_val[i] * qp.p2_val[j],
                );
            }
        }
    });
    m
}

pub fn assemble_scalar_stiffness(mesh: &RefinedMesh, level: usize) -> DenseMatrix {
    let n = mesh.p2_node_count(level);
    let mut m = DenseMatrix::zeros(n, n);
    let p2 = mesh.p2_element_nodes(level);
    for_each_qp(mesh, level, RuleKind::Degree4, |e, qp| {
        for i in 0..6 {
            for j in 0..6 {
                let g = qp.p2_grad[i][0] * qp.p2_grad[j][0] + qp.p2_grad[i][1] * qp.p2_grad[j][1];
                m.add(p2[e][i] as usize, p2[e][j] as usize, qp.weight * g);
            }
        }
    });
    m
}

/// Coefficients matching the matrix-free energy operator.
pub struct EnergyFormCtx<'a> {
    pub s_new: f64,
    pub tau: f64,
    pub kappa: f64,
    pub adiabatic: f64,
    pub include_advection: bool,
    pub u_star: Option<&'a [f64]>,
    pub inv_density: &'a dyn Fn([f64; 2]) -> f64,
    pub grad_ln_density: &'a dyn Fn([f64; 2]) -> [f64; 2],
}

/// Dense energy operator (trial j = temperature, test i).
pub fn assemble_energy(mesh: &RefinedMesh, level: usize, ctx: &EnergyFormCtx) -> DenseMatrix {
    let n = mesh.p2_node_count(level);
    let mut m = DenseMatrix::zeros(n, n);
    let p2 = mesh.p2_element_nodes(level);
    for_each_qp(mesh, level, RuleKind::Degree6, |e, qp| {
        let inv_rho = (ctx.inv_density)(qp.x);
        let glr = (ctx.grad_ln_density)(qp.x);
        let r = (qp.x[0] * qp.x[0] + qp.x[1] * qp.x[1]).sqrt();
        let gvec = [-qp.x[0] / r, -qp.x[1] / r];
        let mut uq = [0.0; 2];
        if let Some(us) = ctx.u_star {
            for k in 0..6 {
                let id = p2[e][k] as usize;
                uq[0] += us[2 * id] * qp.p2_val[k];
                uq[1] += us[2 * id + 1] * qp.p2_val[k];
            }
        }
        let ug = uq[0] * gvec[0] + uq[1] * gvec[1];
        for i in 0..6 {
            for j in 0..6 {
                let mut v = ctx.s_new * qp.p2_val[j] * qp.p2_val[i];
                let gjgi =
                    qp.p2_grad[j][0] * qp.p2_grad[i][0] + qp.p2_grad[j][1] * qp.p2_grad[i][1];
                let gjglr = qp.p2_grad[j][0] * glr[0] + qp.p2_grad[j][1] * glr[1];
                v += ctx.tau * ctx.kappa * inv_rho * (gjgi - qp.p2_val[i] * gjglr);
                if ctx.include_advection {
                    v += ctx.tau
                        * (uq[0] * qp.p2_grad[j][0] + uq[1] * qp.p2_grad[j][1])
                        * qp.p2_val[i];
                }
                v -= ctx.tau * ctx.adiabatic * qp.p2_val[j] * ug * qp.p2_val[i];
                m.add(p2[e][i] as usize, p2[e][j] as usize, qp.weight * v);
            }
        }
    });
    m
}
