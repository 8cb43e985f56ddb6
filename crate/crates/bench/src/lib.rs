//! Shared inputs for the criterion benches.

use t4d_core::primitives::{face_patch, FacePatch};
use t4d_core::tools::synth::{synth_talking_sequence, SynthParams};
use t4d_core::MeshSequence;

/// Face patch plus two talking sequences on it that differ in seed and
/// amplitude.
pub fn talking_pair(rows: usize, cols: usize, frames: usize) -> (FacePatch, MeshSequence, MeshSequence) {
    let fp = face_patch(rows, cols);
    let seq = |seed, amplitude| {
        let params = SynthParams {
            frames,
            amplitude,
            seed,
            ..Default::default()
        };
        synth_talking_sequence(&fp.mesh, &fp.lips, params).expect("synthetic sequence")
    };
    let (gt, pred) = (seq(1, 8.0), seq(2, 6.0));
    (fp, gt, pred)
}
