//! Registered-setting metrics: LVE, MVE and FDD over vertex masks, and the
//! trajectory metrics (DTW, discrete Fréchet, δ_M, δ_Cd) over the six lip
//! landmark trajectories.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::cosine_distance;
use crate::mask::{LipLandmarkSet, VertexMask};
use crate::mesh::{MeshSequence, Vec3};

/// Positions of one tracked vertex over time.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory(Vec<Vec3>);

impl Trajectory {
    pub fn new(points: Vec<Vec3>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Empty("trajectory has no points".into()));
        }
        if points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("trajectory has a non-finite coordinate"));
        }
        Ok(Trajectory(points))
    }

    pub fn points(&self) -> &[Vec3] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn steps(&self) -> impl Iterator<Item = Vec3> + '_ {
        self.0.windows(2).map(|w| w[1] - w[0])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub trajectories: Vec<Trajectory>,
    pub landmarks: [usize; 6],
}

/// Six trajectories, upper-lip landmarks first, each in the given order.
pub fn extract_trajectories(seq: &MeshSequence, lips: &LipLandmarkSet) -> Result<TrajectorySet> {
    let v = seq.shared_vertex_count().ok_or_else(|| {
        Error::TopologyMismatch("trajectories need a homogeneous sequence".into())
    })?;
    lips.check_bound_to(v)?;
    let landmarks = lips.ordered();
    let trajectories = landmarks
        .iter()
        .map(|&k| Trajectory(seq.frames().iter().map(|m| m.vertices()[k]).collect()))
        .collect();
    Ok(TrajectorySet {
        trajectories,
        landmarks,
    })
}

/// DTW with the (→, ↓, ↘) step set, no weights, no band.
pub fn dtw(p: &Trajectory, q: &Trajectory) -> f64 {
    dtw_banded(p, q, None)
}

/// DTW restricted to a Sakoe-Chiba band of half-width `max(band, |n - m|)`.
pub fn dtw_banded(p: &Trajectory, q: &Trajectory, band: Option<usize>) -> f64 {
    let (n, m) = (p.len(), q.len());
    let w = band.map(|b| b.max(n.abs_diff(m)));
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut cur = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        cur.fill(f64::INFINITY);
        let (lo, hi) = match w {
            Some(w) => (i.saturating_sub(w).max(1), (i + w).min(m)),
            None => (1, m),
        };
        for j in lo..=hi {
            let cost = (p.0[i - 1] - q.0[j - 1]).norm_squared();
            cur[j] = cost + prev[j - 1].min(prev[j]).min(cur[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[m].sqrt()
}

/// Discrete Fréchet distance (Eiter-Mannila coupling recursion).
pub fn frechet(p: &Trajectory, q: &Trajectory) -> f64 {
    let (n, m) = (p.len(), q.len());
    let mut ca = vec![0.0; n * m];
    for i in 0..n {
        for j in 0..m {
            let d = (p.0[i] - q.0[j]).norm();
            ca[i * m + j] = match (i, j) {
                (0, 0) => d,
                (0, _) => ca[j - 1].max(d),
                (_, 0) => ca[(i - 1) * m].max(d),
                _ => {
                    let best = ca[(i - 1) * m + j]
                        .min(ca[(i - 1) * m + j - 1])
                        .min(ca[i * m + j - 1]);
                    best.max(d)
                }
            };
        }
    }
    ca[n * m - 1]
}

fn check_step_pair(p: &Trajectory, q: &Trajectory) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            found: q.len(),
        });
    }
    if p.len() < 2 {
        return Err(Error::invalid("displacement metrics need at least 2 frames"));
    }
    Ok(())
}

/// Mean squared difference of per-step displacements.
pub fn delta_m(p: &Trajectory, q: &Trajectory) -> Result<f64> {
    check_step_pair(p, q)?;
    let sum: f64 = p.steps().zip(q.steps()).map(|(a, b)| (a - b).norm_squared()).sum();
    Ok(sum / (p.len() - 1) as f64)
}

/// Mean cosine distance of per-step displacements; static steps contribute 0.
pub fn delta_cd(p: &Trajectory, q: &Trajectory) -> Result<f64> {
    check_step_pair(p, q)?;
    let sum: f64 = p.steps().zip(q.steps()).map(|(a, b)| cosine_distance(&a, &b)).sum();
    Ok(sum / (p.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregate {
    Max,
    Mean,
}

impl Aggregate {
    fn apply(self, xs: impl Iterator<Item = f64>) -> f64 {
        match self {
            Aggregate::Max => xs.fold(f64::NEG_INFINITY, f64::max),
            Aggregate::Mean => {
                let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
                s / n as f64
            }
        }
    }
}

/// How per-vertex squared errors are reduced: first over vertices within a
/// frame, then over frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorReduction {
    pub vertices: Aggregate,
    pub frames: Aggregate,
}

impl ErrorReduction {
    pub const LVE_DEFAULT: ErrorReduction = ErrorReduction {
        vertices: Aggregate::Max,
        frames: Aggregate::Mean,
    };
    pub const MVE_DEFAULT: ErrorReduction = ErrorReduction {
        vertices: Aggregate::Mean,
        frames: Aggregate::Max,
    };
}

impl fmt::Display for ErrorReduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = |a: Aggregate| match a {
            Aggregate::Max => "max",
            Aggregate::Mean => "mean",
        };
        write!(f, "{}-{}", s(self.vertices), s(self.frames))
    }
}

impl FromStr for ErrorReduction {
    type Err = Error;

    /// `"<vertices>-<frames>"`, e.g. `max-mean`.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |t: &str| match t {
            "max" => Ok(Aggregate::Max),
            "mean" => Ok(Aggregate::Mean),
            _ => Err(Error::invalid(format!("unknown reduction {s:?}; use e.g. max-mean"))),
        };
        let (v, f) = s
            .split_once('-')
            .ok_or_else(|| Error::invalid(format!("unknown reduction {s:?}; use e.g. max-mean")))?;
        Ok(ErrorReduction {
            vertices: parse(v)?,
            frames: parse(f)?,
        })
    }
}

fn reduce_errors(
    gt: &MeshSequence,
    pred: &MeshSequence,
    vertices: Option<&[usize]>,
    how: ErrorReduction,
) -> f64 {
    let per_frame: Vec<f64> = gt
        .frames()
        .par_iter()
        .zip(pred.frames())
        .map(|(g, p)| {
            let (g, p) = (g.vertices(), p.vertices());
            match vertices {
                Some(idx) => how.vertices.apply(idx.iter().map(|&k| (g[k] - p[k]).norm_squared())),
                None => how
                    .vertices
                    .apply(g.iter().zip(p).map(|(a, b)| (a - b).norm_squared())),
            }
        })
        .collect();
    how.frames.apply(per_frame.into_iter())
}

/// Lip vertex error over the mouth mask (default: per-frame max, mean over frames).
pub fn lve(gt: &MeshSequence, pred: &MeshSequence, mouth: &VertexMask, how: ErrorReduction) -> Result<f64> {
    gt.check_registered_pair(pred)?;
    mouth.check_bound_to(gt.frames()[0].vertex_count())?;
    if mouth.is_empty() {
        return Err(Error::Empty(format!("mask {:?} is empty", mouth.label())));
    }
    Ok(reduce_errors(gt, pred, Some(mouth.indices()), how))
}

/// Mean vertex error over all vertices (default: per-frame mean, max over frames).
pub fn mve(gt: &MeshSequence, pred: &MeshSequence, how: ErrorReduction) -> Result<f64> {
    gt.check_registered_pair(pred)?;
    Ok(reduce_errors(gt, pred, None, how))
}

/// Population standard deviation of each masked vertex's distance from its
/// first-frame position.
pub fn vertex_dynamics(seq: &MeshSequence, mask: &VertexMask) -> Vec<f64> {
    let frames = seq.frames();
    let t = frames.len() as f64;
    mask.indices()
        .iter()
        .map(|&k| {
            let origin = frames[0].vertices()[k];
            let d: Vec<f64> = frames.iter().map(|m| (m.vertices()[k] - origin).norm()).collect();
            let mean = d.iter().sum::<f64>() / t;
            (d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / t).sqrt()
        })
        .collect()
}

/// Signed face dynamics deviation: mean of `dyn_gt - dyn_pred` over the upper-face mask.
pub fn fdd(gt: &MeshSequence, pred: &MeshSequence, upper: &VertexMask) -> Result<f64> {
    gt.check_registered_pair(pred)?;
    upper.check_bound_to(gt.frames()[0].vertex_count())?;
    if upper.is_empty() {
        return Err(Error::Empty(format!("mask {:?} is empty", upper.label())));
    }
    if gt.len() < 2 {
        return Err(Error::invalid("FDD needs at least 2 frames"));
    }
    let a = vertex_dynamics(gt, upper);
    let b = vertex_dynamics(pred, upper);
    Ok(a.iter().zip(&b).map(|(x, y)| x - y).sum::<f64>() / a.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisteredConventions {
    pub lve_reduction: ErrorReduction,
    pub mve_reduction: ErrorReduction,
    /// Sakoe-Chiba half-width for DTW; `None` is unconstrained.
    pub dtw_band: Option<usize>,
}

impl Default for RegisteredConventions {
    fn default() -> Self {
        RegisteredConventions {
            lve_reduction: ErrorReduction::LVE_DEFAULT,
            mve_reduction: ErrorReduction::MVE_DEFAULT,
            dtw_band: None,
        }
    }
}

/// Trajectory metrics for one lip landmark.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkMetrics {
    pub vertex: usize,
    pub dtw: f64,
    pub dfd: f64,
    pub delta_m: f64,
    pub delta_cd: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegisteredMetrics {
    pub lve: f64,
    pub mve: f64,
    /// Signed; see [`fdd`].
    pub fdd: f64,
    pub dtw: f64,
    pub dfd: f64,
    pub delta_m: f64,
    pub delta_cd: f64,
    pub per_landmark: Vec<LandmarkMetrics>,
}

impl RegisteredMetrics {
    /// `(name, value)` pairs in table order; `fdd_abs` follows the signed FDD.
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("lve", self.lve),
            ("mve", self.mve),
            ("fdd", self.fdd),
            ("fdd_abs", self.fdd.abs()),
            ("dtw", self.dtw),
            ("dfd", self.dfd),
            ("delta_m", self.delta_m),
            ("delta_cd", self.delta_cd),
        ]
    }
}

/// All seven registered metrics; trajectory metrics are unweighted means over
/// the six landmarks.
pub fn evaluate_registered(
    gt: &MeshSequence,
    pred: &MeshSequence,
    mouth: &VertexMask,
    upper: &VertexMask,
    lips: &LipLandmarkSet,
    conv: &RegisteredConventions,
) -> Result<RegisteredMetrics> {
    gt.check_registered_pair(pred)?;
    let v = gt.frames()[0].vertex_count();
    mouth.check_bound_to(v)?;
    upper.check_bound_to(v)?;
    lips.check_bound_to(v)?;

    let lve = lve(gt, pred, mouth, conv.lve_reduction)?;
    let mve = mve(gt, pred, conv.mve_reduction)?;
    let fdd = fdd(gt, pred, upper)?;

    let tg = extract_trajectories(gt, lips)?;
    let tp = extract_trajectories(pred, lips)?;
    let per_landmark = tg
        .trajectories
        .par_iter()
        .zip(&tp.trajectories)
        .zip(&tg.landmarks)
        .map(|((p, q), &vertex)| {
            Ok(LandmarkMetrics {
                vertex,
                dtw: dtw_banded(p, q, conv.dtw_band),
                dfd: frechet(p, q),
                delta_m: delta_m(p, q)?,
                delta_cd: delta_cd(p, q)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mean = |f: fn(&LandmarkMetrics) -> f64| {
        per_landmark.iter().map(f).sum::<f64>() / per_landmark.len() as f64
    };
    Ok(RegisteredMetrics {
        lve,
        mve,
        fdd,
        dtw: mean(|l| l.dtw),
        dfd: mean(|l| l.dfd),
        delta_m: mean(|l| l.delta_m),
        delta_cd: mean(|l| l.delta_cd),
        per_landmark,
    })
}
