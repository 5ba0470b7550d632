//! Builds the blended annulus mesh and writes it as a legacy VTK file.
//!
//! Run: cargo run --release --example mesh_to_vtk [LEVEL]

use mantle::app::output::{write_vtk, VtkFields};
use mantle::geometry::{build_annulus_macro_mesh, RefinedMesh};
use std::path::Path;

fn main() {
    let level: usize = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    let macro_mesh = build_annulus_macro_mesh(8, 2, 1.2037, 2.2037).expect("valid geometry");
    println!(
        "macro mesh: {} triangles, {} vertices",
        macro_mesh.triangles.len(),
        macro_mesh.vertices.len()
    );
    let mesh = RefinedMesh::build(macro_mesh, level);
    println!(
        "level {level}: {} elements, {} vertices, {} quadratic nodes",
        mesh.element_count(level),
        mesh.p1_node_count(level),
        mesh.p2_node_count(level)
    );
    let path = format!("annulus_level{level}.vtk");
    write_vtk(Path::new(&path), &mesh, level, &VtkFields::none()).expect("write vtk");
    println!("wrote {path}");
}
