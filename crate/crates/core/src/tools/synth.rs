//! Procedural talking motion for test fixtures.
//!
//! The lower-lip region moves along -y by
//! `amplitude * weight(k) * envelope(t)`, with
//! `envelope(t) = |sin(π r t + φ0 + ε sin(2π f_w t + ψ))|`. The syllable rate
//! `r`, phase `φ0`, wobble depth `ε` and wobble phase `ψ` come from the seed.
//! `weight(k)` is a smoothstep below the mouth line times a Gaussian around
//! the lower-lip landmarks, so upper-lip landmarks stay still.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::LipLandmarkSet;
use crate::mesh::{Mesh, MeshSequence, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthParams {
    pub frames: usize,
    pub fps: f64,
    /// Peak jaw opening in mm.
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            frames: 120,
            fps: 30.0,
            amplitude: 8.0,
            seed: 0,
        }
    }
}

/// Closed form of the generated motion.
#[derive(Debug, Clone)]
pub struct TalkingMotion {
    pub params: SynthParams,
    /// Half-periods of the envelope per second.
    pub syllable_rate: f64,
    pub phase: f64,
    pub wobble_depth: f64,
    pub wobble_phase: f64,
    pub wobble_freq: f64,
    /// Per-vertex weight in [0, 1].
    pub weights: Vec<f64>,
}

impl TalkingMotion {
    pub fn new(template: &Mesh, lips: &LipLandmarkSet, params: SynthParams) -> Result<Self> {
        if params.frames < 2 {
            return Err(Error::invalid("synthetic sequences need at least 2 frames"));
        }
        if !(params.fps > 0.0) {
            return Err(Error::invalid(format!("fps must be positive, got {}", params.fps)));
        }
        if !(params.amplitude >= 0.0) {
            return Err(Error::invalid("amplitude must be nonnegative"));
        }
        lips.check_bound_to(template.vertex_count())?;
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let syllable_rate = 3.5 + rng.random::<f64>();
        let phase = rng.random::<f64>() * PI;
        let wobble_depth = 0.2 + 0.2 * rng.random::<f64>();
        let wobble_phase = rng.random::<f64>() * 2.0 * PI;

        let p = template.vertices();
        let mean = |idx: [usize; 3]| idx.iter().map(|&i| p[i]).sum::<Vec3>() / 3.0;
        let lower = mean(lips.lower());
        let upper = mean(lips.upper());
        let gap = (upper.y - lower.y).abs().max(1e-9);
        let cut = 0.5 * (upper.y + lower.y);
        let spread = lips
            .lower()
            .iter()
            .map(|&i| (p[i] - lower).norm())
            .fold(0.0, f64::max)
            .max(gap);
        let radius = 4.0 * spread;
        let weights = p
            .iter()
            .map(|v| {
                let s = ((cut - v.y) / (0.5 * gap)).clamp(0.0, 1.0);
                let smooth = s * s * (3.0 - 2.0 * s);
                smooth * (-(v - lower).norm_squared() / (radius * radius)).exp()
            })
            .collect();
        Ok(TalkingMotion {
            params,
            syllable_rate,
            phase,
            wobble_depth,
            wobble_phase,
            wobble_freq: 0.5,
            weights,
        })
    }

    pub fn envelope(&self, frame: usize) -> f64 {
        let t = frame as f64 / self.params.fps;
        (PI * self.syllable_rate * t
            + self.phase
            + self.wobble_depth * (2.0 * PI * self.wobble_freq * t + self.wobble_phase).sin())
        .sin()
        .abs()
    }

    /// Displacement of vertex `k` at `frame` (only the y component is nonzero).
    pub fn offset(&self, frame: usize, k: usize) -> Vec3 {
        Vec3::new(0.0, -self.params.amplitude * self.weights[k] * self.envelope(frame), 0.0)
    }

    pub fn sequence(&self, template: &Mesh) -> Result<MeshSequence> {
        let frames = (0..self.params.frames)
            .map(|t| {
                let v = template
                    .vertices()
                    .iter()
                    .enumerate()
                    .map(|(k, p)| p + self.offset(t, k))
                    .collect();
                template.with_vertices(v)
            })
            .collect::<Result<Vec<_>>>()?;
        MeshSequence::new(frames, self.params.fps)?.with_neutral(template.clone())
    }
}

pub fn synth_talking_sequence(template: &Mesh, lips: &LipLandmarkSet, params: SynthParams) -> Result<MeshSequence> {
    TalkingMotion::new(template, lips, params)?.sequence(template)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::face_patch;
    use crate::registered::extract_trajectories;

    #[test]
    fn zero_amplitude_is_static() {
        let fp = face_patch(20, 20);
        let s = synth_talking_sequence(&fp.mesh, &fp.lips, SynthParams { amplitude: 0.0, frames: 10, ..Default::default() })
            .unwrap();
        assert!(s.frames().iter().all(|m| m.vertices() == fp.mesh.vertices()));
    }

    #[test]
    fn trajectories_follow_closed_form() {
        let fp = face_patch(24, 24);
        let params = SynthParams { frames: 60, seed: 5, ..Default::default() };
        let motion = TalkingMotion::new(&fp.mesh, &fp.lips, params).unwrap();
        let seq = motion.sequence(&fp.mesh).unwrap();
        let set = extract_trajectories(&seq, &fp.lips).unwrap();
        for (n, traj) in set.trajectories.iter().enumerate() {
            let k = set.landmarks[n];
            let y0 = fp.mesh.vertices()[k].y;
            for (t, p) in traj.points().iter().enumerate() {
                let want = y0 - params.amplitude * motion.weights[k] * motion.envelope(t);
                assert!((p.y - want).abs() < 1e-9);
                if n < 3 {
                    assert_eq!(p.y, y0, "upper lip must not move");
                }
            }
        }
        assert!(fp.lips.lower().iter().all(|&k| motion.weights[k] > 0.5));
    }

    #[test]
    fn seeds_change_phase_not_energy() {
        let fp = face_patch(16, 16);
        let energy = |seed| {
            let m = TalkingMotion::new(&fp.mesh, &fp.lips, SynthParams { seed, ..Default::default() }).unwrap();
            let e: f64 = (0..m.params.frames).map(|t| m.envelope(t).powi(2)).sum();
            (m.phase, e)
        };
        let (pa, ea) = energy(1);
        let (pb, eb) = energy(2);
        assert_ne!(pa, pb);
        assert!((ea - eb).abs() / ea.max(eb) < 0.1);
    }
}
