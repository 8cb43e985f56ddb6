//! Vertex masks and lip landmark sets, bound to a specific topology.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sorted, unique vertex indices labelled with the region they describe.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VertexMask {
    indices: Vec<usize>,
    label: String,
    vertex_count: usize,
}

#[derive(Serialize, Deserialize)]
struct MaskFile {
    label: String,
    indices: Vec<i64>,
}

impl VertexMask {
    /// Fails on duplicates or on indices outside `0..vertex_count`.
    pub fn new(label: impl Into<String>, mut indices: Vec<usize>, vertex_count: usize) -> Result<Self> {
        indices.sort_unstable();
        if let Some(w) = indices.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate mask index {}", w[0])));
        }
        if let Some(&i) = indices.last() {
            if i >= vertex_count {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    count: vertex_count,
                });
            }
        }
        Ok(VertexMask {
            indices,
            label: label.into(),
            vertex_count,
        })
    }

    pub fn all(label: impl Into<String>, vertex_count: usize) -> Self {
        VertexMask {
            indices: (0..vertex_count).collect(),
            label: label.into(),
            vertex_count,
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Dense 0/1 weights over the bound topology.
    pub fn weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.vertex_count];
        for &i in &self.indices {
            w[i] = 1.0;
        }
        w
    }

    pub fn check_bound_to(&self, vertex_count: usize) -> Result<()> {
        if self.vertex_count != vertex_count {
            return Err(Error::TopologyMismatch(format!(
                "mask {:?} is defined for {} vertices, mesh has {}",
                self.label, self.vertex_count, vertex_count
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let f = MaskFile {
            label: self.label.clone(),
            indices: self.indices.iter().map(|&i| i as i64).collect(),
        };
        serde_json::to_string(&f).expect("mask serializes")
    }
}

pub fn load_mask(path: impl AsRef<Path>, vertex_count: usize) -> Result<VertexMask> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let f: MaskFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    let indices = f
        .indices
        .into_iter()
        .map(|i| usize::try_from(i).map_err(|_| Error::invalid(format!("negative mask index {i}"))))
        .collect::<Result<Vec<_>>>()?;
    VertexMask::new(f.label, indices, vertex_count)
}

/// Six tracked lip vertices: three on the upper lip, three on the lower.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LipLandmarkSet {
    upper: [usize; 3],
    lower: [usize; 3],
    vertex_count: usize,
}

#[derive(Serialize, Deserialize)]
struct LipsFile {
    upper: [usize; 3],
    lower: [usize; 3],
}

impl LipLandmarkSet {
    pub fn new(upper: [usize; 3], lower: [usize; 3], vertex_count: usize) -> Result<Self> {
        let mut all: Vec<usize> = upper.iter().chain(&lower).copied().collect();
        if let Some(&i) = all.iter().find(|&&i| i >= vertex_count) {
            return Err(Error::IndexOutOfRange {
                index: i,
                count: vertex_count,
            });
        }
        all.sort_unstable();
        all.dedup();
        if all.len() != 6 {
            return Err(Error::invalid("lip landmarks must be six distinct vertices"));
        }
        Ok(LipLandmarkSet {
            upper,
            lower,
            vertex_count,
        })
    }

    pub fn upper(&self) -> [usize; 3] {
        self.upper
    }

    pub fn lower(&self) -> [usize; 3] {
        self.lower
    }

    /// Upper then lower, each in the given order.
    pub fn ordered(&self) -> [usize; 6] {
        let [a, b, c] = self.upper;
        let [d, e, f] = self.lower;
        [a, b, c, d, e, f]
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn check_bound_to(&self, vertex_count: usize) -> Result<()> {
        if self.vertex_count != vertex_count {
            return Err(Error::TopologyMismatch(format!(
                "lip landmarks are defined for {} vertices, mesh has {}",
                self.vertex_count, vertex_count
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&LipsFile {
            upper: self.upper,
            lower: self.lower,
        })
        .expect("landmarks serialize")
    }
}

pub fn load_lips(path: impl AsRef<Path>, vertex_count: usize) -> Result<LipLandmarkSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let f: LipsFile = serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.into(),
        source,
    })?;
    LipLandmarkSet::new(f.upper, f.lower, vertex_count)
}
