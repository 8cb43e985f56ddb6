//! Evaluation toolkit for 4D face-mesh sequences.
//!
//! Meshes are triangle soups with fixed connectivity per sequence. Registered
//! metrics (LVE, MVE, FDD, lip-trajectory distances) need one-to-one vertex
//! correspondence; unregistered ones (Hausdorff, Chamfer, varifold) do not.
//! All lengths are in mm.

pub mod error;
pub mod io;
pub mod kdtree;
pub mod losses;
pub mod mask;
pub mod mesh;
pub mod primitives;
pub mod registered;
pub mod report;
pub mod sparse;
pub mod surf_ops;
pub mod tools;
pub mod unregistered;

pub use error::{Error, Result};
pub use io::{load_mesh, load_sequence, save_mesh, LoadOptions, MeshFormat};
pub use mask::{load_lips, load_mask, LipLandmarkSet, VertexMask};
pub use mesh::{Mesh, MeshSequence, TopologyMode, Vec3};
pub use registered::{evaluate_registered, ErrorReduction, RegisteredConventions, RegisteredMetrics, Trajectory};
pub use report::{Conventions, MetricReport, Mode, SequenceEntry};
pub use sparse::CsrMatrix;
pub use surf_ops::{precompute_operators, OperatorOptions, SurfaceOperators};
pub use unregistered::{evaluate_unregistered, UnregisteredMetrics, VarifoldOptions};
