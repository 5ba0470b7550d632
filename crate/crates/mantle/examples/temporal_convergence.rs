//! Small temporal-convergence study of the coupled BDF2/characteristics
//! scheme against the rotating manufactured solution (the full study is the
//! convergence-test mode of the command-line tool).
//!
//! Run: cargo run --release --example temporal_convergence

use mantle::app::{convergence_error, fitted_slope};
use mantle::geometry::{build_annulus_macro_mesh, RefinedMesh};

fn main() {
    let level = 3;
    let mesh = RefinedMesh::build(build_annulus_macro_mesh(8, 2, 0.5, 1.5).unwrap(), level);
    let mut pts = Vec::new();
    println!("level {level}, diffusivity 0.1:");
    for n in [8usize, 16, 32] {
        let err = convergence_error(&mesh, level, 0.1, n, false, 1e-10).expect("solve");
        println!("  N = {n:>3}: error {err:.4e}");
        pts.push((1.0 / n as f64, err));
    }
    println!("fitted slope: {:.2}", fitted_slope(&pts));
}
