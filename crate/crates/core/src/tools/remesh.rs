//! Random remeshing: partial midpoint refinement followed by shortest-edge
//! collapses, used to synthesize unregistered topologies from a template.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{edge_key, Mesh, Vec3, ZERO_AREA_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RemeshParams {
    /// Fraction of faces split 1→4 (neighbours are split conformingly).
    pub up_fraction: f64,
    /// Collapse edges until at most `down_ratio * V_original` vertices remain.
    pub down_ratio: f64,
    pub seed: u64,
}

impl Default for RemeshParams {
    fn default() -> Self {
        RemeshParams {
            up_fraction: 0.3,
            down_ratio: 0.8,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Remeshed {
    pub mesh: Mesh,
    pub collapses: usize,
    /// False when collapsing stopped before reaching the vertex target.
    pub reached_target: bool,
    pub warnings: Vec<String>,
}

/// Splits every face into four at its edge midpoints.
pub fn subdivide_midpoint(mesh: &Mesh) -> Mesh {
    let all = vec![true; mesh.face_count()];
    let (v, f, _) = refine(mesh, &all);
    Mesh::new(v, f).expect("subdivision of a valid mesh is valid")
}

/// Splits the selected faces 1→4 and closes the refinement conformingly:
/// faces with one or two split edges become two or three triangles.
/// Returns new vertices, faces, and how many vertices were original.
fn refine(mesh: &Mesh, selected: &[bool]) -> (Vec<Vec3>, Vec<[usize; 3]>, usize) {
    let mut vertices = mesh.vertices().to_vec();
    let original = vertices.len();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    // assign midpoint vertex ids in face order so numbering is deterministic
    for (f, face) in mesh.faces().iter().enumerate() {
        if !selected[f] {
            continue;
        }
        for e in 0..3 {
            let key = edge_key(face[e], face[(e + 1) % 3]);
            midpoint.entry(key).or_insert_with(|| {
                vertices.push((vertices[key.0] + vertices[key.1]) * 0.5);
                vertices.len() - 1
            });
        }
    }
    let mut faces = Vec::with_capacity(mesh.face_count() * 2);
    for face in mesh.faces() {
        let mids: [Option<usize>; 3] =
            std::array::from_fn(|e| midpoint.get(&edge_key(face[e], face[(e + 1) % 3])).copied());
        match mids.iter().filter(|m| m.is_some()).count() {
            0 => faces.push(*face),
            3 => {
                let [a, b, c] = *face;
                let (ab, bc, ca) = (mids[0].unwrap(), mids[1].unwrap(), mids[2].unwrap());
                faces.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
            }
            1 => {
                // rotate so the split edge is (v0, v1)
                let e = mids.iter().position(Option::is_some).unwrap();
                let (a, b, c) = (face[e], face[(e + 1) % 3], face[(e + 2) % 3]);
                let m = mids[e].unwrap();
                faces.extend([[a, m, c], [m, b, c]]);
            }
            _ => {
                // rotate so the unsplit edge is (v2, v0): split edges are (a,b) and (b,c)
                let e = mids.iter().position(Option::is_none).unwrap();
                let (a, b, c) = (face[(e + 1) % 3], face[(e + 2) % 3], face[e]);
                let mab = mids[(e + 1) % 3].unwrap();
                let mbc = mids[(e + 2) % 3].unwrap();
                faces.push([mab, b, mbc]);
                // split the remaining quad (a, mab, mbc, c) along its shorter diagonal
                let d1 = (vertices[a] - vertices[mbc]).norm_squared();
                let d2 = (vertices[mab] - vertices[c]).norm_squared();
                if d1 <= d2 {
                    faces.extend([[a, mab, mbc], [a, mbc, c]]);
                } else {
                    faces.extend([[a, mab, c], [mab, mbc, c]]);
                }
            }
        }
    }
    (vertices, faces, original)
}

struct Collapser {
    pos: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    face_alive: Vec<bool>,
    vert_alive: Vec<bool>,
    vert_faces: Vec<Vec<usize>>,
    boundary: Vec<bool>,
    original: usize,
    alive_vertices: usize,
    alive_faces: usize,
}

impl Collapser {
    fn new(pos: Vec<Vec3>, faces: Vec<[usize; 3]>, original: usize) -> Self {
        let n = pos.len();
        let mut vert_faces = vec![Vec::new(); n];
        let mut edge_count: HashMap<(usize, usize), usize> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for e in 0..3 {
                vert_faces[f[e]].push(fi);
                *edge_count.entry(edge_key(f[e], f[(e + 1) % 3])).or_insert(0) += 1;
            }
        }
        let mut boundary = vec![false; n];
        for (&(a, b), &c) in &edge_count {
            if c == 1 {
                boundary[a] = true;
                boundary[b] = true;
            }
        }
        let alive_faces = faces.len();
        Collapser {
            pos,
            face_alive: vec![true; faces.len()],
            faces,
            vert_alive: vec![true; n],
            vert_faces,
            boundary,
            original,
            alive_vertices: n,
            alive_faces,
        }
    }

    fn ring(&self, v: usize) -> Vec<usize> {
        let mut r: Vec<usize> = self.vert_faces[v]
            .iter()
            .flat_map(|&f| self.faces[f])
            .filter(|&w| w != v)
            .collect();
        r.sort_unstable();
        r.dedup();
        r
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<(usize, usize)> = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, &a)| a)
            .flat_map(|(f, _)| (0..3).map(move |i| edge_key(f[i], f[(i + 1) % 3])))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    /// Whether removing `u` by merging it into `v` keeps the mesh a valid manifold
    /// without folding or degenerating any face.
    fn can_collapse(&self, u: usize, v: usize) -> bool {
        let shared: Vec<usize> = self.vert_faces[u]
            .iter()
            .copied()
            .filter(|&f| self.faces[f].contains(&v))
            .collect();
        let is_boundary_edge = shared.len() == 1;
        if shared.is_empty() || shared.len() > 2 {
            return false;
        }
        if self.boundary[u] && !is_boundary_edge {
            return false;
        }
        if self.alive_faces - shared.len() < 4 {
            return false;
        }
        // link condition
        let ru = self.ring(u);
        let rv = self.ring(v);
        let mut opposite: Vec<usize> = shared
            .iter()
            .map(|&f| *self.faces[f].iter().find(|&&w| w != u && w != v).unwrap())
            .collect();
        opposite.sort_unstable();
        let common: Vec<usize> = ru.iter().copied().filter(|w| rv.binary_search(w).is_ok()).collect();
        if common != opposite {
            return false;
        }
        // geometry of faces that survive and move
        for &f in &self.vert_faces[u] {
            if shared.contains(&f) {
                continue;
            }
            let face = self.faces[f];
            let p = |w: usize| self.pos[w];
            let old = (p(face[1]) - p(face[0])).cross(&(p(face[2]) - p(face[0])));
            let moved = face.map(|w| if w == u { v } else { w });
            let new = (p(moved[1]) - p(moved[0])).cross(&(p(moved[2]) - p(moved[0])));
            let (no, nn) = (old.norm(), new.norm());
            if 0.5 * nn <= ZERO_AREA_TOL * 1e3 || old.dot(&new) <= 0.5 * no * nn {
                return false;
            }
        }
        true
    }

    fn collapse(&mut self, u: usize, v: usize) {
        let faces_u = std::mem::take(&mut self.vert_faces[u]);
        for f in faces_u {
            if self.faces[f].contains(&v) {
                self.face_alive[f] = false;
                self.alive_faces -= 1;
                for w in self.faces[f] {
                    if w != u {
                        self.vert_faces[w].retain(|&g| g != f);
                    }
                }
            } else {
                for w in self.faces[f].iter_mut() {
                    if *w == u {
                        *w = v;
                    }
                }
                self.vert_faces[v].push(f);
            }
        }
        self.vert_alive[u] = false;
        self.alive_vertices -= 1;
    }

    fn finish(self) -> Result<Mesh> {
        let mut remap = vec![usize::MAX; self.pos.len()];
        let mut vertices = Vec::with_capacity(self.alive_vertices);
        for (i, &alive) in self.vert_alive.iter().enumerate() {
            if alive && !self.vert_faces[i].is_empty() {
                remap[i] = vertices.len();
                vertices.push(self.pos[i]);
            }
        }
        let faces = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, &a)| a)
            .map(|(f, _)| f.map(|w| remap[w]))
            .collect();
        Mesh::new(vertices, faces)
    }
}

pub fn remesh_random(mesh: &Mesh, params: &RemeshParams) -> Result<Remeshed> {
    if !(0.0..=1.0).contains(&params.up_fraction) {
        return Err(Error::invalid(format!(
            "up fraction must be in [0, 1], got {}",
            params.up_fraction
        )));
    }
    if !(params.down_ratio > 0.0 && params.down_ratio <= 1.0) {
        return Err(Error::invalid(format!(
            "down ratio must be in (0, 1], got {}",
            params.down_ratio
        )));
    }
    mesh.validate_strict()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut order: Vec<usize> = (0..mesh.face_count()).collect();
    order.shuffle(&mut rng);
    let n_split = (params.up_fraction * mesh.face_count() as f64).round() as usize;
    let mut selected = vec![false; mesh.face_count()];
    for &f in &order[..n_split] {
        selected[f] = true;
    }
    let (pos, faces, original) = refine(mesh, &selected);

    let target = (params.down_ratio * mesh.vertex_count() as f64).floor() as usize;
    let mut c = Collapser::new(pos, faces, original);
    let mut collapses = 0;
    let mut warnings = Vec::new();
    while c.alive_vertices > target {
        let mut edges: Vec<(f64, usize, usize)> = c
            .edges()
            .into_iter()
            .map(|(a, b)| {
                let len = (c.pos[a] - c.pos[b]).norm();
                (len * (1.0 + 0.25 * rng.random::<f64>()), a, b)
            })
            .collect();
        edges.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        let mut touched = vec![false; c.pos.len()];
        let mut progressed = false;
        for (_, a, b) in edges {
            if c.alive_vertices <= target {
                break;
            }
            if touched[a] || touched[b] || !c.vert_alive[a] || !c.vert_alive[b] {
                continue;
            }
            // prefer removing inserted midpoints, otherwise pick a side at random
            let a_first = match (a >= c.original, b >= c.original) {
                (true, false) => true,
                (false, true) => false,
                _ => rng.random::<bool>(),
            };
            let tries = if a_first { [(a, b), (b, a)] } else { [(b, a), (a, b)] };
            if let Some(&(u, v)) = tries.iter().find(|&&(u, v)| c.can_collapse(u, v)) {
                for w in c.ring(u) {
                    touched[w] = true;
                }
                touched[u] = true;
                touched[v] = true;
                c.collapse(u, v);
                collapses += 1;
                progressed = true;
            }
        }
        if !progressed {
            warnings.push(format!(
                "no legal collapse remains at {} vertices (target {target})",
                c.alive_vertices
            ));
            break;
        }
    }
    let reached_target = c.alive_vertices <= target;
    let out = c.finish()?;
    for w in &warnings {
        log::warn!("remesh: {w}");
    }
    Ok(Remeshed {
        mesh: out,
        collapses,
        reached_target,
        warnings,
    })
}
