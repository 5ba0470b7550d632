use mantle::app::{convergence_error, fitted_constant};
use mantle::geometry::{build_annulus_macro_mesh, RefinedMesh};

fn main() {
    let level = 5;
    let mesh = RefinedMesh::build(build_annulus_macro_mesh(8, 2, 0.5, 1.5).unwrap(), level);
    for k in [1e-5f64, 1e-3, 1e-1, 3.0] {
        let mut pts = Vec::new();
        for n in [8usize, 16, 32] {
            let e = convergence_error(&mesh, level, k, n, false, 1e-10).unwrap();
            pts.push((1.0 / n as f64, e));
        }
        let c = fitted_constant(&pts);
        eprintln!("k = {k:.0e}: errors {:?} constant {c:.3}", pts.iter().map(|p| p.1).collect::<Vec<_>>());
    }
}
