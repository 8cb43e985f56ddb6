//! Topology-free distances between meshes: vertex-set Hausdorff, Chamfer and
//! the unoriented varifold kernel metric.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::losses::NearestDistances;
use crate::mesh::{Mesh, MeshSequence, Vec3, ZERO_AREA_TOL};

/// Kernel scale used when none is given.
pub const DEFAULT_SIGMA: f64 = 0.1;
/// Default truncation radius for the position kernel, in units of sigma.
pub const DEFAULT_TRUNCATION: f64 = 4.0;

/// Symmetric Hausdorff distance between two vertex sets.
pub fn hausdorff(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    Ok(NearestDistances::compute(a, b)?.hausdorff())
}

/// Per-face centers, areas and unit normals of a triangle mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct VarifoldRep {
    pub centers: Vec<Vec3>,
    pub areas: Vec<f64>,
    pub normals: Vec<Vec3>,
    /// Number of zero-area faces that were left out.
    pub dropped: usize,
}

pub fn varifold_rep(mesh: &Mesh) -> Result<VarifoldRep> {
    let mut rep = VarifoldRep {
        centers: Vec::with_capacity(mesh.face_count()),
        areas: Vec::with_capacity(mesh.face_count()),
        normals: Vec::with_capacity(mesh.face_count()),
        dropped: 0,
    };
    for f in 0..mesh.face_count() {
        let cross = mesh.face_cross(f);
        let area = 0.5 * cross.norm();
        if area <= ZERO_AREA_TOL {
            rep.dropped += 1;
            continue;
        }
        let [a, b, c] = mesh.face_corners(f);
        rep.centers.push((a + b + c) / 3.0);
        rep.areas.push(area);
        rep.normals.push(cross / (2.0 * area));
    }
    if rep.areas.is_empty() {
        return Err(Error::Degenerate("every face has zero area".into()));
    }
    if rep.dropped > 0 {
        log::warn!("varifold: dropped {} zero-area face(s)", rep.dropped);
    }
    Ok(rep)
}

impl VarifoldRep {
    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }
}

/// How the position kernel sum is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarifoldOptions {
    pub sigma: f64,
    /// Ignore pairs of faces farther apart than `truncation * sigma`;
    /// `None` evaluates the full double sum.
    pub truncation: Option<f64>,
}

impl Default for VarifoldOptions {
    fn default() -> Self {
        VarifoldOptions {
            sigma: DEFAULT_SIGMA,
            truncation: Some(DEFAULT_TRUNCATION),
        }
    }
}

impl VarifoldOptions {
    pub fn exact(sigma: f64) -> Self {
        VarifoldOptions {
            sigma,
            truncation: None,
        }
    }

    fn check(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::invalid(format!("sigma must be positive, got {}", self.sigma)));
        }
        if let Some(t) = self.truncation {
            if !(t > 0.0) {
                return Err(Error::invalid(format!("truncation radius must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

#[inline]
fn kernel_term(af: f64, ag: f64, d2: f64, nf: &Vec3, ng: &Vec3, inv_s2: f64) -> f64 {
    let c = nf.dot(ng);
    af * ag * (-d2 * inv_s2).exp() * c * c
}

/// `<μX, μY> = Σ_f Σ_g a_f a_g exp(-|c_f - c_g|² / σ²) <n_f, n_g>²`.
pub fn varifold_inner(x: &VarifoldRep, y: &VarifoldRep, opts: &VarifoldOptions) -> Result<f64> {
    opts.check()?;
    let inv_s2 = 1.0 / (opts.sigma * opts.sigma);
    let rows: Vec<f64> = match opts.truncation {
        None => (0..x.len())
            .into_par_iter()
            .with_min_len(64)
            .map(|f| {
                (0..y.len())
                    .map(|g| {
                        let d2 = (x.centers[f] - y.centers[g]).norm_squared();
                        kernel_term(x.areas[f], y.areas[g], d2, &x.normals[f], &y.normals[g], inv_s2)
                    })
                    .sum()
            })
            .collect(),
        Some(t) => {
            let tree = KdTree::new(&y.centers);
            let radius = t * opts.sigma;
            (0..x.len())
                .into_par_iter()
                .with_min_len(64)
                .map(|f| {
                    let mut s = 0.0;
                    tree.for_each_within(&x.centers[f], radius, |g, d2| {
                        s += kernel_term(x.areas[f], y.areas[g], d2, &x.normals[f], &y.normals[g], inv_s2);
                    });
                    s
                })
                .collect()
        }
    };
    Ok(rows.iter().sum())
}

/// Squared varifold distance `<μX,μX> + <μY,μY> - 2<μX,μY>`.
pub fn varifold_metric(x: &VarifoldRep, y: &VarifoldRep, opts: &VarifoldOptions) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::Empty("varifold representation has no faces".into()));
    }
    let xx = varifold_inner(x, x, opts)?;
    let yy = varifold_inner(y, y, opts)?;
    let xy = varifold_inner(x, y, opts)?;
    Ok(xx + yy - 2.0 * xy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnregisteredMetrics {
    pub hd: f64,
    pub cd: f64,
    pub varifold: f64,
    pub per_frame_hd: Vec<f64>,
    pub per_frame_cd: Vec<f64>,
    pub per_frame_varifold: Vec<f64>,
}

impl UnregisteredMetrics {
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        vec![("hd", self.hd), ("cd", self.cd), ("varifold", self.varifold)]
    }
}

/// Frame-wise HD, Chamfer and varifold distance, averaged over frames.
pub fn evaluate_unregistered(
    gt: &MeshSequence,
    pred: &MeshSequence,
    opts: &VarifoldOptions,
) -> Result<UnregisteredMetrics> {
    opts.check()?;
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            found: pred.len(),
        });
    }
    let per_frame = gt
        .frames()
        .par_iter()
        .zip(pred.frames())
        .map(|(g, p)| {
            let nn = NearestDistances::compute(g.vertices(), p.vertices())?;
            let lk = varifold_metric(&varifold_rep(g)?, &varifold_rep(p)?, opts)?;
            Ok((nn.hausdorff(), nn.chamfer(), lk))
        })
        .collect::<Result<Vec<_>>>()?;
    let t = per_frame.len() as f64;
    let per_frame_hd: Vec<f64> = per_frame.iter().map(|r| r.0).collect();
    let per_frame_cd: Vec<f64> = per_frame.iter().map(|r| r.1).collect();
    let per_frame_varifold: Vec<f64> = per_frame.iter().map(|r| r.2).collect();
    Ok(UnregisteredMetrics {
        hd: per_frame_hd.iter().sum::<f64>() / t,
        cd: per_frame_cd.iter().sum::<f64>() / t,
        varifold: per_frame_varifold.iter().sum::<f64>() / t,
        per_frame_hd,
        per_frame_cd,
        per_frame_varifold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::icosphere;

    fn tri_at(offset: Vec3) -> Mesh {
        Mesh::new(
            vec![offset, offset + Vec3::x(), offset + Vec3::y()],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn hausdorff_examples() {
        let o = Vec3::zeros();
        assert_eq!(hausdorff(&[o], &[o]).unwrap(), 0.0);
        assert_eq!(hausdorff(&[o], &[Vec3::new(3., 4., 0.)]).unwrap(), 5.0);
        assert_eq!(hausdorff(&[o, Vec3::new(10., 0., 0.)], &[o]).unwrap(), 10.0);
        assert!(hausdorff(&[], &[o]).is_err());
    }

    #[test]
    fn rep_of_unit_right_triangle() {
        let rep = varifold_rep(&tri_at(Vec3::zeros())).unwrap();
        assert!((rep.centers[0] - Vec3::new(1. / 3., 1. / 3., 0.)).norm() < 1e-15);
        assert_eq!(rep.areas[0], 0.5);
        assert_eq!(rep.normals[0], Vec3::z());
        assert_eq!(rep.dropped, 0);
    }

    #[test]
    fn zero_area_face_dropped() {
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::x() * 2.0],
            vec![[0, 1, 2], [0, 1, 3]],
        )
        .unwrap();
        let rep = varifold_rep(&m).unwrap();
        assert_eq!((rep.len(), rep.dropped), (1, 1));
        let flat = Mesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0], vec![[0, 1, 2]]).unwrap();
        assert!(varifold_rep(&flat).is_err());
        let sphere = icosphere(2, 1.0);
        assert!((varifold_rep(&sphere).unwrap().total_area() - sphere.total_area()).abs() < 1e-12);
    }

    #[test]
    fn far_apart_triangles() {
        let sigma = 0.1;
        let x = varifold_rep(&tri_at(Vec3::zeros())).unwrap();
        let y = varifold_rep(&tri_at(Vec3::x() * 100.0 * sigma)).unwrap();
        let exact = varifold_metric(&x, &y, &VarifoldOptions::exact(sigma)).unwrap();
        assert!((exact - 0.5).abs() < 1e-12);
        assert!(varifold_inner(&x, &y, &VarifoldOptions::exact(sigma)).unwrap() < 1e-100);
    }

    #[test]
    fn sigma_must_be_positive() {
        let x = varifold_rep(&tri_at(Vec3::zeros())).unwrap();
        for s in [0.0, -1.0, f64::NAN] {
            assert!(varifold_metric(&x, &x, &VarifoldOptions::exact(s)).is_err());
        }
    }
}
