//! Precomputed surface operators: cotangent Laplacian, lumped mass matrix,
//! Laplace-Beltrami eigenbasis and tangent-plane gradient matrices.
//!
//! Conventions:
//! - `L = D - W` with `w_ij = (cot α_ij + cot β_ij) / 2`, one term on boundary
//!   edges. `L` is positive semidefinite.
//! - Mass is barycentric: each vertex gets a third of its incident face areas.
//! - Eigenpairs solve `L φ = λ M φ` and are `M`-orthonormal, ascending.
//! - Gradients are least-squares fits over each vertex's one-ring, expressed
//!   in a per-vertex tangent frame. Linear fields are reproduced exactly,
//!   curved or not.

mod cache;
mod eigen;

use nalgebra::{DMatrix, Matrix3, Vector3};

pub use cache::{cache_file_name, load_operators, save_operators};
pub use eigen::{EigenSolver, DENSE_LIMIT};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec3};
use crate::sparse::CsrMatrix;

pub const DEFAULT_EIGEN_COUNT: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OperatorOptions {
    /// Clamp negative cotangent edge weights at zero.
    pub clamp_cotangents: bool,
    pub solver: EigenSolver,
}

/// Orthonormal tangent basis and unit normal at one vertex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentFrame {
    pub e1: Vec3,
    pub e2: Vec3,
    pub normal: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceOperators {
    pub laplacian: CsrMatrix,
    pub mass: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    /// `V x k`, one eigenvector per column.
    pub eigenvectors: DMatrix<f64>,
    pub gradient_x: CsrMatrix,
    pub gradient_y: CsrMatrix,
    pub tangent_frames: Vec<TangentFrame>,
    pub mesh_hash: [u8; 32],
    pub clamp_cotangents: bool,
}

pub fn precompute_operators(mesh: &Mesh, k: usize) -> Result<SurfaceOperators> {
    precompute_operators_with(mesh, k, OperatorOptions::default())
}

pub fn precompute_operators_with(mesh: &Mesh, k: usize, opts: OperatorOptions) -> Result<SurfaceOperators> {
    let n = mesh.vertex_count();
    if k == 0 || k > n {
        return Err(Error::invalid(format!(
            "eigenpair count must be in 1..={n}, got {k}"
        )));
    }
    mesh.check_edge_manifold()?;
    let zero = mesh.zero_area_faces();
    if let Some(&f) = zero.first() {
        return Err(Error::Degenerate(format!(
            "face {f} has zero area; operators need non-degenerate triangles"
        )));
    }
    let mass = lumped_mass(mesh);
    if let Some(i) = mass.iter().position(|&m| m <= 0.0) {
        return Err(Error::Degenerate(format!("vertex {i} is not referenced by any face")));
    }
    let laplacian = cotangent_laplacian(mesh, opts.clamp_cotangents);
    let pairs = eigen::solve(&laplacian, &mass, k, opts.solver)?;
    let tangent_frames = tangent_frames(mesh);
    let (gradient_x, gradient_y) = gradient_matrices(mesh, &tangent_frames);
    Ok(SurfaceOperators {
        laplacian,
        mass,
        eigenvalues: pairs.values,
        eigenvectors: pairs.vectors,
        gradient_x,
        gradient_y,
        tangent_frames,
        mesh_hash: mesh.content_hash(),
        clamp_cotangents: opts.clamp_cotangents,
    })
}

/// Cotangent of the angle at `a` in triangle (a, b, c).
fn cot_at(a: &Vec3, b: &Vec3, c: &Vec3) -> f64 {
    let u = b - a;
    let v = c - a;
    u.dot(&v) / u.cross(&v).norm()
}

pub fn cotangent_laplacian(mesh: &Mesh, clamp: bool) -> CsrMatrix {
    let n = mesh.vertex_count();
    let mut weights = std::collections::HashMap::with_capacity(mesh.face_count() * 3);
    let p = mesh.vertices();
    for f in mesh.faces() {
        for corner in 0..3 {
            let i = f[corner];
            let j = f[(corner + 1) % 3];
            let k = f[(corner + 2) % 3];
            let w = 0.5 * cot_at(&p[i], &p[j], &p[k]);
            *weights.entry(crate::mesh::edge_key(j, k)).or_insert(0.0) += w;
        }
    }
    let mut triplets = Vec::with_capacity(weights.len() * 4);
    let mut diag = vec![0.0; n];
    for ((a, b), mut w) in weights {
        if clamp {
            w = w.max(0.0);
        }
        triplets.push((a, b, -w));
        triplets.push((b, a, -w));
        diag[a] += w;
        diag[b] += w;
    }
    triplets.extend(diag.into_iter().enumerate().map(|(i, d)| (i, i, d)));
    CsrMatrix::from_triplets(n, n, triplets)
}

pub fn lumped_mass(mesh: &Mesh) -> Vec<f64> {
    let mut mass = vec![0.0; mesh.vertex_count()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let a = mesh.face_area(fi) / 3.0;
        for &i in f {
            mass[i] += a;
        }
    }
    mass
}

/// Area-weighted vertex normals with a tangent basis built from the global
/// x axis projected into the tangent plane (y axis when x is nearly normal).
pub fn tangent_frames(mesh: &Mesh) -> Vec<TangentFrame> {
    let mut normals = vec![Vec3::zeros(); mesh.vertex_count()];
    for (fi, f) in mesh.faces().iter().enumerate() {
        let c = mesh.face_cross(fi);
        for &i in f {
            normals[i] += c;
        }
    }
    normals
        .into_iter()
        .map(|n| {
            let normal = n.try_normalize(0.0).unwrap_or_else(Vec3::z);
            let axis = if normal.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
            let e1 = (axis - normal * normal.dot(&axis)).normalize();
            let e2 = normal.cross(&e1);
            TangentFrame { e1, e2, normal }
        })
        .collect()
}

fn gradient_matrices(mesh: &Mesh, frames: &[TangentFrame]) -> (CsrMatrix, CsrMatrix) {
    let n = mesh.vertex_count();
    let mut ring: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (a, b) in mesh.edges() {
        ring[a].push(b);
        ring[b].push(a);
    }
    let p = mesh.vertices();
    let mut tx = Vec::new();
    let mut ty = Vec::new();
    for i in 0..n {
        let fr = &frames[i];
        // the normal offset is a third regressor so that out-of-plane ring
        // positions do not leak into the tangential fit; on flat rings that
        // column vanishes and the pseudo-inverse drops it
        let coords: Vec<Vector3<f64>> = ring[i]
            .iter()
            .map(|&j| {
                let e = p[j] - p[i];
                Vector3::new(e.dot(&fr.e1), e.dot(&fr.e2), e.dot(&fr.normal))
            })
            .collect();
        let mut ata = Matrix3::zeros();
        for c in &coords {
            ata += c * c.transpose();
        }
        let Some(inv) = ata.pseudo_inverse(1e-12 * ata.norm().max(f64::MIN_POSITIVE)).ok() else {
            continue;
        };
        let (mut sx, mut sy) = (0.0, 0.0);
        for (&j, c) in ring[i].iter().zip(&coords) {
            let g = inv * c;
            tx.push((i, j, g.x));
            ty.push((i, j, g.y));
            sx += g.x;
            sy += g.y;
        }
        tx.push((i, i, -sx));
        ty.push((i, i, -sy));
    }
    (
        CsrMatrix::from_triplets(n, n, tx),
        CsrMatrix::from_triplets(n, n, ty),
    )
}

impl SurfaceOperators {
    pub fn vertex_count(&self) -> usize {
        self.mass.len()
    }

    pub fn eigen_count(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Spectral heat flow `Φ diag(exp(-λt)) Φᵀ M u0`, truncated to the stored eigenpairs.
    pub fn heat_diffuse(&self, u0: &[f64], t: f64) -> Result<Vec<f64>> {
        if !(t >= 0.0) {
            return Err(Error::invalid(format!("diffusion time must be >= 0, got {t}")));
        }
        self.check_field(u0)?;
        let n = self.vertex_count();
        let weighted: Vec<f64> = u0.iter().zip(&self.mass).map(|(u, m)| u * m).collect();
        let mut out = vec![0.0; n];
        for (j, col) in self.eigenvectors.column_iter().enumerate() {
            let coeff: f64 = col.iter().zip(&weighted).map(|(a, b)| a * b).sum();
            let c = coeff * (-self.eigenvalues[j] * t).exp();
            for (o, v) in out.iter_mut().zip(col.iter()) {
                *o += c * v;
            }
        }
        Ok(out)
    }

    /// Per-vertex tangent-frame gradient `(G_x u, G_y u)`.
    pub fn gradient(&self, u: &[f64]) -> Result<Vec<[f64; 2]>> {
        self.check_field(u)?;
        let gx = self.gradient_x.mul_vec(u);
        let gy = self.gradient_y.mul_vec(u);
        Ok(gx.into_iter().zip(gy).map(|(x, y)| [x, y]).collect())
    }

    fn check_field(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.vertex_count() {
            return Err(Error::LengthMismatch {
                expected: self.vertex_count(),
                found: u.len(),
            });
        }
        Ok(())
    }
}
