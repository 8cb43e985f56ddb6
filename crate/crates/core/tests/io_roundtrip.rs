mod common;

use std::fs;

use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use t4d_core::io::{list_frames, load_sequence, mesh_to_obj, mesh_to_ply};
use t4d_core::primitives::{face_patch, icosphere};
use t4d_core::{load_mesh, save_mesh, MeshFormat};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn save_load_save_is_a_fixed_point(seed in any::<u64>(), scale in 1e-3f64..1e4) {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let base = icosphere(1, scale);
        let mesh = base.with_vertices(
            base.vertices().iter().map(|p| p + common::random_point(&mut r, 0.1 * scale)).collect(),
        ).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for ext in ["obj", "ply"] {
            let first = dir.path().join(format!("a.{ext}"));
            let second = dir.path().join(format!("b.{ext}"));
            save_mesh(&mesh, &first, MeshFormat::Auto).unwrap();
            let loaded = load_mesh(&first, MeshFormat::Auto).unwrap();
            prop_assert_eq!(loaded.faces(), mesh.faces());
            save_mesh(&loaded, &second, MeshFormat::Auto).unwrap();
            let again = load_mesh(&second, MeshFormat::Auto).unwrap();
            prop_assert_eq!(again.vertices(), loaded.vertices());
            prop_assert_eq!(fs::read(&first).unwrap(), fs::read(&second).unwrap());
            for (a, b) in loaded.vertices().iter().zip(mesh.vertices()) {
                prop_assert!((a - b).norm() <= 1e-8 * scale);
            }
        }
    }

    #[test]
    fn frame_order_ignores_creation_order(seed in any::<u64>()) {
        let mut names: Vec<String> = (0..25).map(|i| format!("frame_{i}.obj")).collect();
        let expected = names.clone();
        names.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let dir = tempfile::tempdir().unwrap();
        let tri = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        for n in &names {
            fs::write(dir.path().join(n), tri).unwrap();
        }
        let listed: Vec<String> = list_frames(dir.path(), "*.obj")
            .unwrap()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        prop_assert_eq!(listed, expected);
    }
}

#[test]
fn obj_and_ply_load_the_same_mesh() {
    let mesh = face_patch(10, 12).mesh;
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.obj"), mesh_to_obj(&mesh)).unwrap();
    fs::write(dir.path().join("m.ply"), mesh_to_ply(&mesh)).unwrap();
    let a = load_mesh(dir.path().join("m.obj"), MeshFormat::Auto).unwrap();
    let b = load_mesh(dir.path().join("m.ply"), MeshFormat::Auto).unwrap();
    assert_eq!(a, b);
}

#[test]
fn sequence_loads_in_natural_order() {
    let dir = tempfile::tempdir().unwrap();
    for i in [10, 2, 1] {
        let m = icosphere(0, i as f64);
        save_mesh(&m, dir.path().join(format!("f{i}.obj")), MeshFormat::Obj).unwrap();
    }
    let seq = load_sequence(dir.path(), "*.obj", 25.0).unwrap();
    let radii: Vec<f64> = seq.frames().iter().map(|m| m.vertices()[0].norm()).collect();
    assert_eq!(radii.len(), 3);
    assert!((radii[0] - 1.0).abs() < 1e-8 && (radii[1] - 2.0).abs() < 1e-8 && (radii[2] - 10.0).abs() < 1e-7);
    assert!(seq.is_homogeneous());
}
