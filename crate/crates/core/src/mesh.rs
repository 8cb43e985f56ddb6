//! Triangle meshes and mesh sequences.

use std::collections::HashMap;

use nalgebra::Vector3;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Faces with area at or below this value (mm²) are reported as zero-area.
pub const ZERO_AREA_TOL: f64 = 1e-12;

/// One frame: vertex positions in millimeters and triangle connectivity.
///
/// Construction checks that every index is in range and that no face repeats
/// a vertex. Zero-area faces are allowed but can be listed with
/// [`Mesh::zero_area_faces`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
}

impl Mesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &i in f {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, count: n });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::DegenerateFace { face: fi });
            }
        }
        if let Some((i, _)) = vertices
            .iter()
            .enumerate()
            .find(|(_, v)| !v.iter().all(|c| c.is_finite()))
        {
            return Err(Error::invalid(format!("vertex {i} has a non-finite coordinate")));
        }
        Ok(Mesh { vertices, faces })
    }

    /// Same connectivity, new positions.
    pub fn with_vertices(&self, vertices: Vec<Vec3>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::LengthMismatch {
                expected: self.vertices.len(),
                found: vertices.len(),
            });
        }
        Mesh::new(vertices, self.faces.clone())
    }

    /// Applies `f` to every vertex position.
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(f).collect(),
            faces: self.faces.clone(),
        }
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn face_corners(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Un-normalized face normal, twice the face area in length.
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.face_corners(f);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, f: usize) -> f64 {
        0.5 * self.face_cross(f).norm()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    pub fn zero_area_faces(&self) -> Vec<usize> {
        (0..self.faces.len())
            .filter(|&f| self.face_area(f) <= ZERO_AREA_TOL)
            .collect()
    }

    /// Undirected edges with the number of faces incident to each, keyed `(min, max)`.
    pub fn edge_face_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::with_capacity(self.faces.len() * 2);
        for f in &self.faces {
            for e in 0..3 {
                *counts.entry(edge_key(f[e], f[(e + 1) % 3])).or_insert(0) += 1;
            }
        }
        counts
    }

    /// Sorted list of unique undirected edges.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut edges: Vec<_> = self.edge_face_counts().into_keys().collect();
        edges.sort_unstable();
        edges
    }

    /// Fails on the first edge with more than two incident faces.
    pub fn check_edge_manifold(&self) -> Result<()> {
        let mut bad: Vec<_> = self
            .edge_face_counts()
            .into_iter()
            .filter(|&(_, c)| c > 2)
            .collect();
        bad.sort_unstable();
        match bad.first() {
            Some(&((a, b), c)) => Err(Error::NonManifoldEdge(a, b, c)),
            None => Ok(()),
        }
    }

    /// Checks edge manifoldness and reports zero-area faces as an error.
    pub fn validate_strict(&self) -> Result<()> {
        self.check_edge_manifold()?;
        let zero = self.zero_area_faces();
        if let Some(&f) = zero.first() {
            return Err(Error::Degenerate(format!(
                "{} zero-area face(s), first is face {f}",
                zero.len()
            )));
        }
        Ok(())
    }

    pub fn max_edge_length(&self) -> f64 {
        self.edges()
            .iter()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .fold(0.0, f64::max)
    }

    pub fn mean_edge_length(&self) -> f64 {
        let edges = self.edges();
        if edges.is_empty() {
            return 0.0;
        }
        edges
            .iter()
            .map(|&(a, b)| (self.vertices[a] - self.vertices[b]).norm())
            .sum::<f64>()
            / edges.len() as f64
    }

    /// Vertices lying on an edge with a single incident face.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut on_boundary = vec![false; self.vertices.len()];
        for ((a, b), c) in self.edge_face_counts() {
            if c == 1 {
                on_boundary[a] = true;
                on_boundary[b] = true;
            }
        }
        on_boundary
    }

    pub fn same_topology(&self, other: &Mesh) -> bool {
        self.vertices.len() == other.vertices.len() && self.faces == other.faces
    }

    /// SHA-256 over the little-endian coordinates and face indices.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.vertices.len() as u64).to_le_bytes());
        h.update((self.faces.len() as u64).to_le_bytes());
        for v in &self.vertices {
            for c in v.iter() {
                h.update(c.to_le_bytes());
            }
        }
        for f in &self.faces {
            for &i in f {
                h.update((i as u64).to_le_bytes());
            }
        }
        h.finalize().into()
    }
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TopologyMode {
    Homogeneous,
    Heterogeneous,
}

/// Ordered frames sampled at `fps`, with an optional neutral (rest) frame.
#[derive(Debug, Clone)]
pub struct MeshSequence {
    frames: Vec<Mesh>,
    fps: f64,
    neutral: Option<Mesh>,
    topology_mode: TopologyMode,
}

impl MeshSequence {
    /// Builds a sequence and infers whether all frames share one topology.
    pub fn new(frames: Vec<Mesh>, fps: f64) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Empty("sequence has no frames".into()));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::invalid(format!("fps must be positive, got {fps}")));
        }
        let first = &frames[0];
        let topology_mode = if frames.iter().all(|m| m.same_topology(first)) {
            TopologyMode::Homogeneous
        } else {
            TopologyMode::Heterogeneous
        };
        Ok(MeshSequence {
            frames,
            fps,
            neutral: None,
            topology_mode,
        })
    }

    pub fn with_neutral(mut self, neutral: Mesh) -> Result<Self> {
        if self.topology_mode == TopologyMode::Homogeneous && !neutral.same_topology(&self.frames[0]) {
            return Err(Error::TopologyMismatch(
                "neutral frame does not share the sequence topology".into(),
            ));
        }
        self.neutral = Some(neutral);
        Ok(self)
    }

    pub fn frames(&self) -> &[Mesh] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn neutral(&self) -> Option<&Mesh> {
        self.neutral.as_ref()
    }

    pub fn topology_mode(&self) -> TopologyMode {
        self.topology_mode
    }

    pub fn is_homogeneous(&self) -> bool {
        self.topology_mode == TopologyMode::Homogeneous
    }

    /// Vertex count of the shared topology, or `None` when heterogeneous.
    pub fn shared_vertex_count(&self) -> Option<usize> {
        self.is_homogeneous().then(|| self.frames[0].vertex_count())
    }

    /// Applies the same vertex map to every frame (and the neutral frame).
    pub fn map_vertices(&self, f: impl Fn(&Vec3) -> Vec3 + Copy) -> MeshSequence {
        MeshSequence {
            frames: self.frames.iter().map(|m| m.map_vertices(f)).collect(),
            fps: self.fps,
            neutral: self.neutral.as_ref().map(|m| m.map_vertices(f)),
            topology_mode: self.topology_mode,
        }
    }

    /// Checks that `other` is registered against `self`: both homogeneous,
    /// same topology, same length.
    pub fn check_registered_pair(&self, other: &MeshSequence) -> Result<()> {
        if !self.is_homogeneous() || !other.is_homogeneous() {
            return Err(Error::TopologyMismatch(
                "registered evaluation needs homogeneous sequences; use unregistered mode for per-frame topologies"
                    .into(),
            ));
        }
        if self.len() != other.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                found: other.len(),
            });
        }
        if !self.frames[0].same_topology(&other.frames[0]) {
            return Err(Error::TopologyMismatch(format!(
                "sequences differ in topology ({} vs {} vertices, {} vs {} faces)",
                self.frames[0].vertex_count(),
                other.frames[0].vertex_count(),
                self.frames[0].face_count(),
                other.frames[0].face_count()
            )));
        }
        Ok(())
    }
}
