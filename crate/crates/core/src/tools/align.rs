//! Correspondence-based similarity (Procrustes / Umeyama) alignment.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, MeshSequence, Vec3};

/// `x ↦ scale · rotation · x + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
    pub scale: f64,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
            scale: 1.0,
        }
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation * p * self.scale + self.translation
    }
}

#[derive(Debug, Clone)]
pub struct Alignment {
    pub mesh: Mesh,
    pub transform: SimilarityTransform,
    /// Sum of squared distances between aligned and target vertices.
    pub residual: f64,
}

/// Least-squares rotation (det = +1), translation and optional uniform scale
/// taking `source` onto `target` vertex-by-vertex.
pub fn fit_similarity(source: &[Vec3], target: &[Vec3], with_scale: bool) -> Result<SimilarityTransform> {
    if source.len() != target.len() {
        return Err(Error::TopologyMismatch(format!(
            "alignment needs corresponding points ({} vs {})",
            source.len(),
            target.len()
        )));
    }
    if source.len() < 3 {
        return Err(Error::Degenerate("alignment needs at least 3 points".into()));
    }
    let n = source.len() as f64;
    let mu_s = source.iter().sum::<Vec3>() / n;
    let mu_t = target.iter().sum::<Vec3>() / n;
    let mut cov = Matrix3::zeros();
    let mut scatter_s = Matrix3::zeros();
    let mut scatter_t = Matrix3::zeros();
    for (s, t) in source.iter().zip(target) {
        let ds = s - mu_s;
        let dt = t - mu_t;
        cov += dt * ds.transpose();
        scatter_s += ds * ds.transpose();
        scatter_t += dt * dt.transpose();
    }
    for (name, sc) in [("source", scatter_s), ("target", scatter_t)] {
        let ev = SymmetricEigen::new(sc).eigenvalues;
        let mut ev: Vec<f64> = ev.iter().copied().collect();
        ev.sort_by(|a, b| b.total_cmp(a));
        if ev[0] <= 0.0 || ev[1] <= 1e-12 * ev[0] {
            return Err(Error::Degenerate(format!("{name} points are collinear or coincident")));
        }
    }
    let svd = cov.svd(true, true);
    let u = svd.u.expect("u requested");
    let v_t = svd.v_t.expect("v_t requested");
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let rotation = u * d * v_t;
    let scale = if with_scale {
        let var_s = scatter_s.trace();
        (Matrix3::from_diagonal(&svd.singular_values) * d).trace() / var_s
    } else {
        1.0
    };
    let translation = mu_t - rotation * mu_s * scale;
    Ok(SimilarityTransform {
        rotation,
        translation,
        scale,
    })
}

pub fn residual(source: &[Vec3], target: &[Vec3], tf: &SimilarityTransform) -> f64 {
    source
        .iter()
        .zip(target)
        .map(|(s, t)| (tf.apply(s) - t).norm_squared())
        .sum()
}

pub fn align_rigid(source: &Mesh, target: &Mesh, with_scale: bool) -> Result<Alignment> {
    if !source.same_topology(target) {
        return Err(Error::TopologyMismatch(
            "rigid alignment needs source and target with the same topology".into(),
        ));
    }
    let transform = fit_similarity(source.vertices(), target.vertices(), with_scale)?;
    let mesh = source.map_vertices(|p| transform.apply(p));
    let residual = residual(source.vertices(), target.vertices(), &transform);
    Ok(Alignment {
        mesh,
        transform,
        residual,
    })
}

/// Estimates one transform on the neutral frame (or the first frame when
/// there is none) and applies it to every frame.
pub fn align_sequence(
    seq: &MeshSequence,
    reference: &Mesh,
    with_scale: bool,
) -> Result<(MeshSequence, SimilarityTransform)> {
    if !seq.is_homogeneous() {
        return Err(Error::TopologyMismatch(
            "sequence alignment needs a homogeneous sequence".into(),
        ));
    }
    let anchor = seq.neutral().unwrap_or(&seq.frames()[0]);
    let tf = align_rigid(anchor, reference, with_scale)?.transform;
    Ok((seq.map_vertices(|p| tf.apply(p)), tf))
}

/// Rotation angle of `a^T b`, in radians.
pub fn rotation_geodesic(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    let r = a.transpose() * b;
    // acos is ill-conditioned near 0; use the atan2 form
    let c = (r.trace() - 1.0) / 2.0;
    let skew = Vec3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]);
    (skew.norm() / 2.0).atan2(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::{face_patch, icosphere};
    use nalgebra::{Rotation3, Unit};

    #[test]
    fn identity_when_already_aligned() {
        let m = icosphere(1, 10.0);
        let a = align_rigid(&m, &m, true).unwrap();
        assert!(rotation_geodesic(&a.transform.rotation, &Matrix3::identity()) < 1e-12);
        assert!(a.transform.translation.norm() < 1e-12);
        assert!((a.transform.scale - 1.0).abs() < 1e-12);
        assert!(a.residual < 1e-20);
    }

    #[test]
    fn recovers_known_transform() {
        let m = face_patch(12, 12).mesh;
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(Vec3::new(0.3, -1.0, 0.4)), 0.7);
        let truth = SimilarityTransform {
            rotation: *rot.matrix(),
            translation: Vec3::new(4.0, -2.0, 9.0),
            scale: 1.3,
        };
        let target = m.map_vertices(|p| truth.apply(p));
        let a = align_rigid(&m, &target, true).unwrap();
        assert!(rotation_geodesic(&a.transform.rotation, &truth.rotation) < 1e-8);
        assert!((a.transform.scale - 1.3).abs() / 1.3 < 1e-8);
        assert!((a.transform.translation - truth.translation).norm() < 1e-8);
    }

    #[test]
    fn reflection_is_not_a_rotation() {
        let m = face_patch(10, 10).mesh;
        let target = m.map_vertices(|p| Vec3::new(-p.x, p.y, p.z));
        let a = align_rigid(&m, &target, false).unwrap();
        assert!((a.transform.rotation.determinant() - 1.0).abs() < 1e-12);
        assert!(a.residual > 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        let line = Mesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(matches!(align_rigid(&line, &line, false), Err(Error::Degenerate(_))));
        let m = icosphere(0, 1.0);
        let other = icosphere(1, 1.0);
        assert!(matches!(align_rigid(&m, &other, false), Err(Error::TopologyMismatch(_))));
    }

    #[test]
    fn geodesic_of_known_angle() {
        let r = Rotation3::from_axis_angle(&Vec3::z_axis(), 0.25);
        assert!((rotation_geodesic(&Matrix3::identity(), r.matrix()) - 0.25).abs() < 1e-15);
    }
}
