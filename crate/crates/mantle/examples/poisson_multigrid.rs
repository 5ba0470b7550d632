//! Measures the V-cycle contraction factor on a Poisson problem over the
//! annulus: Chebyshev-smoothed geometric multigrid with a diagonally
//! preconditioned CG coarse solve.
//!
//! Run: cargo run --release --example poisson_multigrid

use mantle::femcore::operators::ScalarStiffnessOp;
use mantle::geometry::{build_annulus_macro_mesh, BoundaryTag, RefinedMesh};
use mantle::krylov::{
    estimate_spectral_bound, ChebyshevConfig, ChebyshevSetup, LinearOp, MgLevel, Multigrid,
    StoppingRule, VCycleConfig,
};
use std::sync::Arc;

struct DirichletPoisson {
    op: ScalarStiffnessOp,
    boundary: Vec<u32>,
}

impl LinearOp for DirichletPoisson {
    fn dim(&self) -> usize {
        self.op.dim()
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut xp = x.to_vec();
        for &b in &self.boundary {
            xp[b as usize] = 0.0;
        }
        self.op.apply(&xp, y);
        for &b in &self.boundary {
            y[b as usize] = x[b as usize];
        }
    }
}

fn main() {
    let max_level: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(5);
    let macro_mesh = build_annulus_macro_mesh(8, 2, 1.2037, 2.2037).unwrap();
    let mesh = RefinedMesh::build(macro_mesh, max_level);

    let mut levels = Vec::new();
    for level in 0..=max_level {
        let lat = mesh.p2_lattice(level);
        let boundary: Vec<u32> = (0..lat.node_count as u32)
            .filter(|&i| lat.tags[i as usize] != BoundaryTag::Inner)
            .collect();
        let op = Arc::new(DirichletPoisson {
            op: ScalarStiffnessOp {
                mesh: mesh.clone(),
                level,
            },
            boundary: boundary.clone(),
        });
        let diag = op.op.diagonal();
        let inv_diag: Vec<f64> = diag.iter().map(|&d| 1.0 / d).collect();
        let b2 = boundary.clone();
        let project = move |v: &mut [f64]| {
            for &x in &b2 {
                v[x as usize] = 0.0;
            }
        };
        let lambda = estimate_spectral_bound(op.as_ref(), &inv_diag, Some(&project), 30).unwrap();
        let b3 = boundary;
        levels.push(MgLevel {
            op: op as Arc<dyn LinearOp + Send + Sync>,
            smoother: ChebyshevSetup {
                config: ChebyshevConfig::from_estimate(2, lambda),
                inv_diag,
            },
            project: Some(Arc::new(move |v: &mut [f64]| {
                for &x in &b3 {
                    v[x as usize] = 0.0;
                }
            })),
        });
    }
    let transfers = (0..max_level)
        .map(|cl| {
            Box::new(mantle::stokes::hierarchy::MeshTransfer {
                mesh: mesh.clone(),
                coarse_level: cl,
                quadratic: true,
                comps: 1,
            }) as Box<dyn mantle::krylov::Transfer>
        })
        .collect();
    let mg = Multigrid {
        levels,
        transfers,
        config: VCycleConfig {
            smooth_steps: 3,
            coarse_stop: StoppingRule::relative(1e-2, 1000),
        },
    };

    // Error-contraction measurement: start from random error, track the
    // energy norm through several cycles.
    let n = mesh.p2_node_count(max_level);
    let top = &mg.levels[max_level];
    let mut x: Vec<f64> = (0..n).map(|i| ((i * 2654435761) % 1000) as f64 / 1000.0 - 0.5).collect();
    if let Some(p) = &top.project {
        p(&mut x);
    }
    let b = vec![0.0; n];
    let energy = |v: &[f64], op: &dyn LinearOp| {
        let av = op.apply_vec(v);
        v.iter().zip(&av).map(|(a, b)| a * b).sum::<f64>().sqrt()
    };
    let mut e = energy(&x, top.op.as_ref());
    println!("level {max_level}: initial error energy norm {e:.3e}");
    for cycle in 1..=8 {
        mg.vcycle(&b, &mut x);
        let en = energy(&x, top.op.as_ref());
        println!("cycle {cycle}: {en:.3e}  (contraction {:.3})", en / e);
        e = en;
    }
}
