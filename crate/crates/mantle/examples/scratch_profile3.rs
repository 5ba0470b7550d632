use mantle::app::{convergence_error, fitted_slope};
use mantle::geometry::{build_annulus_macro_mesh, RefinedMesh};
use std::time::Instant;

fn main() {
    let mm = build_annulus_macro_mesh(8, 2, 0.5, 1.5).unwrap();
    let mesh = RefinedMesh::build(mm, 5);
    let mut pts = Vec::new();
    for n in [8usize, 16, 32, 64] {
        let t = Instant::now();
        let e = convergence_error(&mesh, 5, 0.1, n, false, 1e-10).unwrap();
        eprintln!("N={n}: err {e:.4e} in {:?}", t.elapsed());
        pts.push((1.0 / n as f64, e));
    }
    eprintln!("LS slope: {:.3}", fitted_slope(&pts));
}
