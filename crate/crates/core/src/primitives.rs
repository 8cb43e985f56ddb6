//! Procedural fixture meshes: planar grid, icosphere and an open face-like
//! patch with mouth landmarks and masks.

use std::collections::HashMap;

use crate::mask::{LipLandmarkSet, VertexMask};
use crate::mesh::{Mesh, Vec3};

/// Flat grid in the z = 0 plane with `nx * ny` vertices, normals along +z.
pub fn plane_grid(nx: usize, ny: usize, spacing: f64) -> Mesh {
    assert!(nx >= 2 && ny >= 2);
    let vertices = (0..ny)
        .flat_map(|j| (0..nx).map(move |i| Vec3::new(i as f64 * spacing, j as f64 * spacing, 0.0)))
        .collect();
    Mesh::new(vertices, grid_faces(nx, ny)).expect("grid is valid")
}

/// Row-major grid triangulation with counter-clockwise faces seen from +z.
fn grid_faces(nx: usize, ny: usize) -> Vec<[usize; 3]> {
    let mut faces = Vec::with_capacity(2 * (nx - 1) * (ny - 1));
    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            let b = a + 1;
            let c = a + nx;
            let d = c + 1;
            // alternate the diagonal so the grid has no preferred direction
            if (i + j) % 2 == 0 {
                faces.push([a, b, d]);
                faces.push([a, d, c]);
            } else {
                faces.push([a, b, c]);
                faces.push([b, d, c]);
            }
        }
    }
    faces
}

/// Icosahedron refined `subdivisions` times with vertices projected to the sphere.
pub fn icosphere(subdivisions: usize, radius: f64) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, vs: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *midpoint.entry(key).or_insert_with(|| {
                vs.push(((vs[a] + vs[b]) * 0.5).normalize());
                vs.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut vertices);
            let bc = mid(b, c, &mut vertices);
            let ca = mid(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = vertices.into_iter().map(|v| v * radius).collect();
    Mesh::new(vertices, faces).expect("icosphere is valid")
}

/// Open, face-like patch of an ellipsoid (millimeter scale) with a mouth
/// line, six lip landmarks and mouth / upper-face masks.
#[derive(Debug, Clone)]
pub struct FacePatch {
    pub mesh: Mesh,
    pub lips: LipLandmarkSet,
    pub mouth: VertexMask,
    pub upper_face: VertexMask,
    /// Grid row holding the lower-lip landmarks; the upper lip is one row above.
    pub lower_lip_row: usize,
    pub cols: usize,
}

pub const FACE_SEMI_AXES: [f64; 3] = [75.0, 100.0, 90.0];

/// `rows x cols` vertex grid over azimuth [-70°, 70°] and elevation [-60°, 60°].
pub fn face_patch(rows: usize, cols: usize) -> FacePatch {
    assert!(rows >= 8 && cols >= 8, "face patch needs at least 8x8 vertices");
    let [a, b, c] = FACE_SEMI_AXES;
    let az = 70f64.to_radians();
    let el = 60f64.to_radians();
    let mut vertices = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        let phi = -el + 2.0 * el * r as f64 / (rows - 1) as f64;
        for q in 0..cols {
            let theta = -az + 2.0 * az * q as f64 / (cols - 1) as f64;
            vertices.push(Vec3::new(
                a * theta.sin() * phi.cos(),
                b * phi.sin(),
                c * theta.cos() * phi.cos(),
            ));
        }
    }
    let mesh = Mesh::new(vertices, grid_faces(cols, rows)).expect("face patch is valid");

    // mouth sits at roughly 30% of the height from the chin
    let lower_lip_row = ((rows - 1) as f64 * 0.3).round() as usize;
    let upper_row = lower_lip_row + 1;
    let mid = cols / 2;
    let step = (cols / 16).max(1);
    let at = |row: usize, col: usize| row * cols + col;
    let lips = LipLandmarkSet::new(
        [at(upper_row, mid - step), at(upper_row, mid), at(upper_row, mid + step)],
        [
            at(lower_lip_row, mid - step),
            at(lower_lip_row, mid),
            at(lower_lip_row, mid + step),
        ],
        mesh.vertex_count(),
    )
    .expect("landmarks are distinct");

    let p = mesh.vertices();
    let mouth_center = (p[at(lower_lip_row, mid)] + p[at(upper_row, mid)]) * 0.5;
    let mouth: Vec<usize> = (0..p.len())
        .filter(|&i| (p[i] - mouth_center).norm() <= 25.0)
        .collect();
    let upper: Vec<usize> = (0..p.len())
        .filter(|&i| p[i].y >= mouth_center.y + 35.0)
        .collect();
    let n = mesh.vertex_count();
    FacePatch {
        lips,
        mouth: VertexMask::new("mouth", mouth, n).expect("mouth mask"),
        upper_face: VertexMask::new("upper_face", upper, n).expect("upper-face mask"),
        mesh,
        lower_lip_row,
        cols,
    }
}
