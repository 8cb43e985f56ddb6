//! Registered sequence losses (MSE, masked MSE, velocity, cosine) and the
//! Chamfer / dynamic Chamfer distances.
//!
//! Every mean divides by the number of summed terms: `T * V` for the
//! position losses and `(T - 1) * V` for the displacement losses.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kdtree::KdTree;
use crate::mask::VertexMask;
use crate::mesh::{MeshSequence, Vec3};

/// Displacements shorter than this (mm) carry no direction.
pub const ZERO_NORM_TOL: f64 = 1e-9;

/// `1 - cos(angle(d, e))`, or 0 when either vector is shorter than [`ZERO_NORM_TOL`].
pub fn cosine_distance(d: &Vec3, e: &Vec3) -> f64 {
    let nd = d.norm();
    let ne = e.norm();
    if nd < ZERO_NORM_TOL || ne < ZERO_NORM_TOL {
        return 0.0;
    }
    // 1 - cos = |d/|d| - e/|e||² / 2, which avoids cancellation near 0 and
    // is exactly 0 for identical inputs
    (0.5 * (d / nd - e / ne).norm_squared()).min(2.0)
}

/// Frame-to-frame vertex displacements of a homogeneous sequence.
#[derive(Debug, Clone)]
pub struct DisplacementField {
    steps: Vec<Vec<Vec3>>,
}

impl DisplacementField {
    pub fn from_sequence(seq: &MeshSequence) -> Result<Self> {
        if !seq.is_homogeneous() {
            return Err(Error::TopologyMismatch(
                "displacements need a homogeneous sequence".into(),
            ));
        }
        let steps = seq
            .frames()
            .windows(2)
            .map(|w| {
                w[1].vertices()
                    .iter()
                    .zip(w[0].vertices())
                    .map(|(b, a)| b - a)
                    .collect()
            })
            .collect();
        Ok(DisplacementField { steps })
    }

    /// `T - 1` steps, each with one vector per vertex.
    pub fn steps(&self) -> &[Vec<Vec3>] {
        &self.steps
    }
}

fn per_frame_sq_errors(gt: &MeshSequence, pred: &MeshSequence) -> Vec<Vec<f64>> {
    gt.frames()
        .par_iter()
        .zip(pred.frames())
        .map(|(g, p)| {
            g.vertices()
                .iter()
                .zip(p.vertices())
                .map(|(a, b)| (a - b).norm_squared())
                .collect()
        })
        .collect()
}

pub fn loss_mse(gt: &MeshSequence, pred: &MeshSequence) -> Result<f64> {
    gt.check_registered_pair(pred)?;
    let errs = per_frame_sq_errors(gt, pred);
    let n = errs.len() * errs[0].len();
    Ok(errs.iter().flatten().sum::<f64>() / n as f64)
}

/// MSE restricted to the mask, still normalized by the full vertex count.
pub fn loss_masked_mse(gt: &MeshSequence, pred: &MeshSequence, mask: &VertexMask) -> Result<f64> {
    gt.check_registered_pair(pred)?;
    let v = gt.frames()[0].vertex_count();
    mask.check_bound_to(v)?;
    let errs = per_frame_sq_errors(gt, pred);
    let total: f64 = errs
        .iter()
        .map(|frame| mask.indices().iter().map(|&k| frame[k]).sum::<f64>())
        .sum();
    Ok(total / (errs.len() * v) as f64)
}

fn displacement_pair(gt: &MeshSequence, pred: &MeshSequence) -> Result<(DisplacementField, DisplacementField)> {
    gt.check_registered_pair(pred)?;
    if gt.len() < 2 {
        return Err(Error::invalid("displacement losses need at least 2 frames"));
    }
    Ok((
        DisplacementField::from_sequence(gt)?,
        DisplacementField::from_sequence(pred)?,
    ))
}

fn mean_over_steps(a: &DisplacementField, b: &DisplacementField, term: impl Fn(&Vec3, &Vec3) -> f64 + Sync) -> f64 {
    let sums: Vec<f64> = a
        .steps
        .par_iter()
        .zip(&b.steps)
        .map(|(x, y)| x.iter().zip(y).map(|(d, e)| term(d, e)).sum())
        .collect();
    let n = a.steps.len() * a.steps[0].len();
    sums.iter().sum::<f64>() / n as f64
}

pub fn loss_velocity(gt: &MeshSequence, pred: &MeshSequence) -> Result<f64> {
    let (a, b) = displacement_pair(gt, pred)?;
    Ok(mean_over_steps(&a, &b, |d, e| (d - e).norm_squared()))
}

pub fn loss_cosine(gt: &MeshSequence, pred: &MeshSequence) -> Result<f64> {
    let (a, b) = displacement_pair(gt, pred)?;
    Ok(mean_over_steps(&a, &b, cosine_distance))
}

/// Squared nearest-neighbour distances from every point of `from` into `tree`.
pub(crate) fn nearest_sq_distances(from: &[Vec3], tree: &KdTree) -> Vec<f64> {
    from.par_iter()
        .with_min_len(256)
        .map(|p| tree.nearest(p).expect("tree is non-empty").1)
        .collect()
}

/// Both directed sets of squared nearest-neighbour distances between two point sets.
#[derive(Debug, Clone)]
pub struct NearestDistances {
    /// For each point of `a`, squared distance to its nearest point of `b`.
    pub a_to_b: Vec<f64>,
    /// For each point of `b`, squared distance to its nearest point of `a`.
    pub b_to_a: Vec<f64>,
}

impl NearestDistances {
    pub fn compute(a: &[Vec3], b: &[Vec3]) -> Result<Self> {
        if a.is_empty() || b.is_empty() {
            return Err(Error::Empty("point set is empty".into()));
        }
        let ta = KdTree::new(a);
        let tb = KdTree::new(b);
        Ok(NearestDistances {
            a_to_b: nearest_sq_distances(a, &tb),
            b_to_a: nearest_sq_distances(b, &ta),
        })
    }

    pub fn chamfer(&self) -> f64 {
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        mean(&self.b_to_a) + mean(&self.a_to_b)
    }

    pub fn hausdorff(&self) -> f64 {
        let max = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
        max(&self.a_to_b).max(max(&self.b_to_a)).sqrt()
    }
}

/// Symmetric Chamfer distance: mean squared nearest-neighbour distance in each direction, summed.
pub fn chamfer(a: &[Vec3], b: &[Vec3]) -> Result<f64> {
    Ok(NearestDistances::compute(a, b)?.chamfer())
}

/// Per-frame Chamfer values of two equal-length sequences (topologies may differ).
pub fn chamfer_per_frame(gt: &MeshSequence, pred: &MeshSequence) -> Result<Vec<f64>> {
    if gt.len() != pred.len() {
        return Err(Error::LengthMismatch {
            expected: gt.len(),
            found: pred.len(),
        });
    }
    gt.frames()
        .par_iter()
        .zip(pred.frames())
        .map(|(g, p)| chamfer(g.vertices(), p.vertices()))
        .collect()
}

pub fn dynamic_chamfer(gt: &MeshSequence, pred: &MeshSequence) -> Result<f64> {
    let per_frame = chamfer_per_frame(gt, pred)?;
    Ok(per_frame.iter().sum::<f64>() / per_frame.len() as f64)
}
