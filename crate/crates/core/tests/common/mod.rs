//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3, Rotation3, Unit, Vector3};
use rand::Rng;
use t4d_core::primitives::{face_patch, icosphere, plane_grid};
use t4d_core::{Mesh, Vec3};

pub fn random_point(rng: &mut impl Rng, half: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-half..=half),
        rng.random_range(-half..=half),
        rng.random_range(-half..=half),
    )
}

pub fn random_points(rng: &mut impl Rng, n: usize, half: f64) -> Vec<Vec3> {
    (0..n).map(|_| random_point(rng, half)).collect()
}

/// Uniform random rotation from a normalized Gaussian quaternion.
pub fn random_rotation(rng: &mut impl Rng) -> Matrix3<f64> {
    let axis = loop {
        let v = random_point(rng, 1.0);
        if v.norm() > 1e-3 {
            break Unit::new_normalize(v);
        }
    };
    let angle = rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
    Rotation3::from_axis_angle(&axis, angle).into_inner()
}

pub fn small_rotation(rng: &mut impl Rng, max_angle: f64) -> Matrix3<f64> {
    let axis = Unit::new_normalize(random_point(rng, 1.0) + Vector3::new(1e-9, 0.0, 0.0));
    Rotation3::from_axis_angle(&axis, rng.random_range(-max_angle..=max_angle)).into_inner()
}

type Fold = fn(f64, &Vec3, &Vec3) -> f64;

/// All monotone warping paths from (0,0) to (n-1,m-1) with steps
/// (1,0), (0,1), (1,1), each folded with `combine`, minimized at the end.
fn enumerate_paths(p: &[Vec3], q: &[Vec3], combine: Fold) -> f64 {
    fn walk(p: &[Vec3], q: &[Vec3], i: usize, j: usize, acc: f64, combine: Fold, best: &mut f64) {
        let acc = combine(acc, &p[i], &q[j]);
        if i + 1 == p.len() && j + 1 == q.len() {
            *best = best.min(acc);
            return;
        }
        if i + 1 < p.len() {
            walk(p, q, i + 1, j, acc, combine, best);
        }
        if j + 1 < q.len() {
            walk(p, q, i, j + 1, acc, combine, best);
        }
        if i + 1 < p.len() && j + 1 < q.len() {
            walk(p, q, i + 1, j + 1, acc, combine, best);
        }
    }
    let mut best = f64::INFINITY;
    walk(p, q, 0, 0, 0.0, combine, &mut best);
    best
}

pub fn enumerate_dtw(p: &[Vec3], q: &[Vec3]) -> f64 {
    enumerate_paths(p, q, |a, x, y| a + (x - y).norm_squared()).sqrt()
}

pub fn enumerate_frechet(p: &[Vec3], q: &[Vec3]) -> f64 {
    enumerate_paths(p, q, |a, x, y| a.max((x - y).norm()))
}

pub fn brute_sq_nearest(from: &[Vec3], to: &[Vec3]) -> Vec<f64> {
    from.iter()
        .map(|a| to.iter().map(|b| (a - b).norm_squared()).fold(f64::INFINITY, f64::min))
        .collect()
}

pub fn brute_chamfer(a: &[Vec3], b: &[Vec3]) -> f64 {
    let ab = brute_sq_nearest(a, b);
    let ba = brute_sq_nearest(b, a);
    ba.iter().sum::<f64>() / ba.len() as f64 + ab.iter().sum::<f64>() / ab.len() as f64
}

pub fn brute_hausdorff(a: &[Vec3], b: &[Vec3]) -> f64 {
    brute_sq_nearest(a, b)
        .into_iter()
        .chain(brute_sq_nearest(b, a))
        .fold(0.0, f64::max)
        .sqrt()
}

/// Matrix exponential by scaling and squaring with a Taylor series.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm1 = (0..n)
        .map(|j| a.column(j).iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = if norm1 > 0.5 { (norm1 / 0.5).log2().ceil() as i32 } else { 0 };
    let b = a / 2f64.powi(s);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=30 {
        term = &term * &b / k as f64;
        sum += &term;
    }
    for _ in 0..s {
        sum = &sum * &sum;
    }
    sum
}

/// Three fixture meshes: flat grid, closed sphere, open curved face patch.
pub fn fixtures() -> Vec<(&'static str, Mesh)> {
    vec![
        ("plane_grid", plane_grid(14, 12, 1.0)),
        ("icosphere", icosphere(2, 1.0)),
        ("face_patch", face_patch(16, 16).mesh),
    ]
}
