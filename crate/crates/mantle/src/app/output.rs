//! Field output: legacy ASCII VTK unstructured grids for visual inspection
//! and line-buffered CSV series.

use crate::femcore::transfer::p2_at_vertices;
use crate::geometry::RefinedMesh;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

/// Writes the blended micro mesh of `level` as a legacy VTK file, optionally
/// with named point data (values per degree-1 node) and vectors.
pub struct VtkFields<'a> {
    pub scalars: Vec<(&'a str, Vec<f64>)>,
    pub vectors: Vec<(&'a str, Vec<[f64; 2]>)>,
}

impl VtkFields<'_> {
    pub fn none() -> Self {
        VtkFields {
            scalars: Vec::new(),
            vectors: Vec::new(),
        }
    }
}

pub fn write_vtk(
    path: &Path,
    mesh: &RefinedMesh,
    level: usize,
    fields: &VtkFields,
) -> std::io::Result<()> {
    let lat = mesh.lattice(level);
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "annulus level {level}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {} double", lat.node_count)?;
    for p in &lat.blended {
        writeln!(w, "{} {} 0.0", p[0], p[1])?;
    }
    let tris = mesh.p1_element_nodes(level);
    writeln!(w, "CELLS {} {}", tris.len(), 4 * tris.len())?;
    for t in tris {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {}", tris.len())?;
    for _ in tris {
        writeln!(w, "5")?;
    }
    if !fields.scalars.is_empty() || !fields.vectors.is_empty() {
        writeln!(w, "POINT_DATA {}", lat.node_count)?;
        for (name, vals) in &fields.scalars {
            assert_eq!(vals.len(), lat.node_count);
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in vals {
                writeln!(w, "{v}")?;
            }
        }
        for (name, vals) in &fields.vectors {
            assert_eq!(vals.len(), lat.node_count);
            writeln!(w, "VECTORS {name} double")?;
            for v in vals {
                writeln!(w, "{} {} 0.0", v[0], v[1])?;
            }
        }
    }
    w.flush()
}

/// Vertex restriction of a degree-2 scalar field for VTK point data.
pub fn p2_scalar_at_vertices(mesh: &RefinedMesh, level: usize, coeffs: &[f64]) -> Vec<f64> {
    p2_at_vertices(mesh, level, coeffs)
}

/// Vertex restriction of an interleaved degree-2 vector field.
pub fn p2_vector_at_vertices(mesh: &RefinedMesh, level: usize, coeffs: &[f64]) -> Vec<[f64; 2]> {
    let vl = mesh.lattice(level);
    let nl = mesh.lattice(level + 1);
    let mut out = vec![[0.0; 2]; vl.node_count];
    for m in 0..mesh.macro_mesh.triangles.len() {
        let n = vl.n;
        for j in 0..=n {
            for i in 0..=(n - j) {
                let v = vl.node(m, i, j) as usize;
                let p = nl.node(m, 2 * i, 2 * j) as usize;
                out[v] = [coeffs[2 * p], coeffs[2 * p + 1]];
            }
        }
    }
    out
}

/// CSV writer flushing every row, so partial runs stay analysable.
pub struct CsvWriter {
    file: BufWriter<File>,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &str) -> std::io::Result<Self> {
        let mut file = BufWriter::new(File::create(path)?);
        writeln!(file, "{header}")?;
        file.flush()?;
        Ok(CsvWriter { file })
    }

    pub fn row(&mut self, fields: &[String]) -> std::io::Result<()> {
        writeln!(self.file, "{}", fields.join(","))?;
        self.file.flush()
    }
}
