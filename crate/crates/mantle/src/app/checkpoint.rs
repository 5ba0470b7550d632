//! Versioned binary checkpoints: little-endian 64-bit floats, a mesh
//! descriptor hash, step index and times, and the raw coefficient arrays of
//! the time-stepping state.

use crate::energy::TimeState;
use crate::femcore::{FieldFunction, FunctionSpace, SpaceKind};
use crate::geometry::RefinedMesh;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;
use thiserror::Error;

const MAGIC: &[u8; 4] = b"MCPT";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint version {found} unsupported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("checkpoint belongs to a different mesh/level (hash mismatch)")]
    MeshMismatch,
}

/// FNV-1a hash of the mesh parameters and level, pinning a checkpoint to
/// its discretisation.
pub fn mesh_descriptor_hash(mesh: &RefinedMesh, level: usize) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    let mut eat = |bytes: &[u8]| {
        for &b in bytes {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    };
    eat(&(mesh.macro_mesh.n_tangential as u64).to_le_bytes());
    eat(&(mesh.macro_mesh.n_radial as u64).to_le_bytes());
    eat(&mesh.macro_mesh.r_cmb.to_le_bytes());
    eat(&mesh.macro_mesh.r_surface.to_le_bytes());
    eat(&(level as u64).to_le_bytes());
    eat(&[mesh.blending.is_identity() as u8]);
    h
}

fn write_array(w: &mut impl Write, v: &[f64]) -> std::io::Result<()> {
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_array(r: &mut impl Read) -> std::io::Result<Vec<f64>> {
    let mut len8 = [0u8; 8];
    r.read_exact(&mut len8)?;
    let len = u64::from_le_bytes(len8) as usize;
    let mut out = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

pub fn save(path: &Path, mesh: &RefinedMesh, level: usize, state: &TimeState) -> Result<(), CheckpointError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&mesh_descriptor_hash(mesh, level).to_le_bytes())?;
    w.write_all(&(state.step as u64).to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    w.write_all(&state.tau_prev.to_le_bytes())?;
    write_array(&mut w, &state.temperature.coeffs)?;
    write_array(&mut w, &state.temperature_prev.coeffs)?;
    write_array(&mut w, &state.velocity.coeffs)?;
    write_array(&mut w, &state.velocity_prev.coeffs)?;
    write_array(&mut w, &state.pressure.coeffs)?;
    w.flush()?;
    Ok(())
}

pub fn load(
    path: &Path,
    mesh: &Arc<RefinedMesh>,
    level: usize,
) -> Result<TimeState, CheckpointError> {
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    if u64::from_le_bytes(b8) != mesh_descriptor_hash(mesh, level) {
        return Err(CheckpointError::MeshMismatch);
    }
    r.read_exact(&mut b8)?;
    let step = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let t = f64::from_le_bytes(b8);
    r.read_exact(&mut b8)?;
    let tau_prev = f64::from_le_bytes(b8);
    let t_space = FunctionSpace::new(mesh.clone(), SpaceKind::P2Scalar, level);
    let v_space = FunctionSpace::new(mesh.clone(), SpaceKind::P2Vector, level);
    let p_space = FunctionSpace::new(mesh.clone(), SpaceKind::P1Scalar, level);
    let field = |space: FunctionSpace, coeffs: Vec<f64>| FieldFunction { space, coeffs };
    Ok(TimeState {
        step,
        t,
        tau_prev,
        temperature: field(t_space.clone(), read_array(&mut r)?),
        temperature_prev: field(t_space, read_array(&mut r)?),
        velocity: field(v_space.clone(), read_array(&mut r)?),
        velocity_prev: field(v_space, read_array(&mut r)?),
        pressure: field(p_space, read_array(&mut r)?),
    })
}
