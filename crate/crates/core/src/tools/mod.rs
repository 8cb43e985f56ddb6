//! Preprocessing and experiment plumbing.

pub mod align;
pub mod mds;
pub mod remesh;
pub mod synth;
