//! Binary operator cache.
//!
//! Layout (little endian): 8-byte magic, 32-byte mesh hash, `V`, `k`,
//! clamp flag, mass, eigenvalues, eigenvectors (column major), three CSR
//! matrices (Laplacian, G_x, G_y), then per-vertex frames `e1 e2 normal`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;

use super::{SurfaceOperators, TangentFrame};
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};
use crate::sparse::CsrMatrix;

const MAGIC: &[u8; 8] = b"T4DOPS\x00\x01";

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Cache file name for a mesh and eigenpair count: `<sha256>-k<k>.ops`.
pub fn cache_file_name(mesh: &Mesh, k: usize) -> String {
    format!("{}-k{k}.ops", hex(&mesh.content_hash()))
}

pub fn save_operators(ops: &SurfaceOperators, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_all(ops, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

fn write_all(ops: &SurfaceOperators, w: &mut impl Write) -> std::io::Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&ops.mesh_hash)?;
    w.write_u64::<LittleEndian>(ops.vertex_count() as u64)?;
    w.write_u64::<LittleEndian>(ops.eigen_count() as u64)?;
    w.write_u8(ops.clamp_cotangents as u8)?;
    write_f64s(w, &ops.mass)?;
    write_f64s(w, &ops.eigenvalues)?;
    write_f64s(w, ops.eigenvectors.as_slice())?;
    for m in [&ops.laplacian, &ops.gradient_x, &ops.gradient_y] {
        write_csr(w, m)?;
    }
    for fr in &ops.tangent_frames {
        for v in [fr.e1, fr.e2, fr.normal] {
            write_f64s(w, v.as_slice())?;
        }
    }
    Ok(())
}

fn write_f64s(w: &mut impl Write, xs: &[f64]) -> std::io::Result<()> {
    for &x in xs {
        w.write_f64::<LittleEndian>(x)?;
    }
    Ok(())
}

fn write_csr(w: &mut impl Write, m: &CsrMatrix) -> std::io::Result<()> {
    let (indptr, indices, values) = m.raw();
    w.write_u64::<LittleEndian>(m.rows() as u64)?;
    w.write_u64::<LittleEndian>(m.cols() as u64)?;
    w.write_u64::<LittleEndian>(values.len() as u64)?;
    for &i in indptr.iter().chain(indices) {
        w.write_u64::<LittleEndian>(i as u64)?;
    }
    write_f64s(w, values)
}

/// Reads a cache file. When `expect` is given, the stored mesh hash and
/// eigenpair count must match it.
pub fn load_operators(path: impl AsRef<Path>, expect: Option<(&Mesh, usize)>) -> Result<SurfaceOperators> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let ops = read_all(&mut r).map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData | std::io::ErrorKind::UnexpectedEof => Error::Parse {
            path: path.into(),
            line: 0,
            message: format!("corrupt operator cache: {e}"),
        },
        _ => Error::io(path, e),
    })?;
    if let Some((mesh, k)) = expect {
        if ops.mesh_hash != mesh.content_hash() || ops.eigen_count() != k {
            return Err(Error::invalid(format!(
                "operator cache {} was built for a different mesh or eigenpair count",
                path.display()
            )));
        }
    }
    Ok(ops)
}

fn bad(msg: &str) -> std::io::Error {
    std::io::Error::new(std::io::ErrorKind::InvalidData, msg.to_string())
}

fn read_all(r: &mut impl Read) -> std::io::Result<SurfaceOperators> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("bad magic"));
    }
    let mut mesh_hash = [0u8; 32];
    r.read_exact(&mut mesh_hash)?;
    let n = r.read_u64::<LittleEndian>()? as usize;
    let k = r.read_u64::<LittleEndian>()? as usize;
    if k > n {
        return Err(bad("eigenpair count exceeds vertex count"));
    }
    let clamp_cotangents = r.read_u8()? != 0;
    let mass = read_f64s(r, n)?;
    let eigenvalues = read_f64s(r, k)?;
    let eigenvectors = DMatrix::from_vec(n, k, read_f64s(r, n * k)?);
    let laplacian = read_csr(r)?;
    let gradient_x = read_csr(r)?;
    let gradient_y = read_csr(r)?;
    let mut tangent_frames = Vec::with_capacity(n);
    for _ in 0..n {
        let v = read_f64s(r, 9)?;
        tangent_frames.push(TangentFrame {
            e1: Vec3::new(v[0], v[1], v[2]),
            e2: Vec3::new(v[3], v[4], v[5]),
            normal: Vec3::new(v[6], v[7], v[8]),
        });
    }
    Ok(SurfaceOperators {
        laplacian,
        mass,
        eigenvalues,
        eigenvectors,
        gradient_x,
        gradient_y,
        tangent_frames,
        mesh_hash,
        clamp_cotangents,
    })
}

fn read_f64s(r: &mut impl Read, n: usize) -> std::io::Result<Vec<f64>> {
    let mut out = vec![0.0; n];
    r.read_f64_into::<LittleEndian>(&mut out)?;
    Ok(out)
}

fn read_csr(r: &mut impl Read) -> std::io::Result<CsrMatrix> {
    let rows = r.read_u64::<LittleEndian>()? as usize;
    let cols = r.read_u64::<LittleEndian>()? as usize;
    let nnz = r.read_u64::<LittleEndian>()? as usize;
    let mut idx = vec![0u64; rows + 1 + nnz];
    r.read_u64_into::<LittleEndian>(&mut idx)?;
    let indptr = idx[..=rows].iter().map(|&i| i as usize).collect();
    let indices = idx[rows + 1..].iter().map(|&i| i as usize).collect();
    let values = read_f64s(r, nnz)?;
    CsrMatrix::from_raw(rows, cols, indptr, indices, values).ok_or_else(|| bad("inconsistent CSR layout"))
}
