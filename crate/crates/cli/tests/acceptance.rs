//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines print in order.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use common::*;
use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use t4d_core::losses::{chamfer, dynamic_chamfer, loss_cosine, loss_masked_mse, loss_mse, loss_velocity};
use t4d_core::primitives::{face_patch, icosphere, FacePatch};
use t4d_core::registered::{dtw, frechet, Trajectory};
use t4d_core::report::{round_sig12, scaled_value, TABLE_SCALES};
use t4d_core::surf_ops::{precompute_operators_with, EigenSolver};
use t4d_core::tools::align::{fit_similarity, rotation_geodesic};
use t4d_core::tools::remesh::{remesh_random, RemeshParams};
use t4d_core::tools::synth::{synth_talking_sequence, SynthParams};
use t4d_core::unregistered::{
    hausdorff, varifold_inner, varifold_metric, varifold_rep, VarifoldOptions, DEFAULT_SIGMA,
};
use t4d_core::{
    evaluate_registered, evaluate_unregistered, precompute_operators, Conventions, Mesh, MeshSequence,
    MetricReport, Mode, OperatorOptions, RegisteredConventions, SequenceEntry, Vec3,
};

type Outcome = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn talking(fp: &FacePatch, frames: usize, seed: u64) -> MeshSequence {
    let params = SynthParams {
        frames,
        fps: 30.0,
        amplitude: 8.0,
        seed,
    };
    synth_talking_sequence(&fp.mesh, &fp.lips, params).unwrap()
}

/// Per-vertex noise on every frame, so that every registered metric is
/// non-zero between two such sequences.
fn noisy(seq: &MeshSequence, seed: u64, amount: f64) -> MeshSequence {
    let mut r = rng(seed);
    let frames = seq
        .frames()
        .iter()
        .map(|m| {
            let v = m.vertices().iter().map(|p| p + random_point(&mut r, amount)).collect();
            m.with_vertices(v).unwrap()
        })
        .collect();
    MeshSequence::new(frames, seq.fps()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn within(elapsed: Duration, limit: f64, what: &str) -> Outcome {
    ensure!(
        elapsed.as_secs_f64() < limit,
        "{what} took {:.2} s (limit {limit} s)",
        elapsed.as_secs_f64()
    );
    Ok(())
}

fn dtw_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    for i in 0..100 {
        let (n, m) = (r.random_range(1..=6), r.random_range(1..=6));
        let p = random_points(&mut r, n, 1.0);
        let q = random_points(&mut r, m, 1.0);
        let got = dtw(&Trajectory::new(p.clone()).unwrap(), &Trajectory::new(q.clone()).unwrap());
        let want = enumerate_dtw(&p, &q);
        ensure!((got - want).abs() <= 1e-12, "pair {i}: {got} vs {want}");
    }
    within(start.elapsed(), 10.0, "100 pairs")
}

fn frechet_oracle() -> Outcome {
    let mut r = rng(2);
    for i in 0..100 {
        let (n, m) = (r.random_range(1..=6), r.random_range(1..=6));
        let p = random_points(&mut r, n, 1.0);
        let q = random_points(&mut r, m, 1.0);
        let got = frechet(&Trajectory::new(p.clone()).unwrap(), &Trajectory::new(q.clone()).unwrap());
        let want = enumerate_frechet(&p, &q);
        ensure!((got - want).abs() <= 1e-12, "pair {i}: {got} vs {want}");
    }
    Ok(())
}

fn chamfer_hausdorff_oracle() -> Outcome {
    let mut r = rng(3);
    let mut cases = Vec::new();
    for _ in 0..200 {
        let (na, nb) = (r.random_range(1..=300), r.random_range(1..=300));
        cases.push((random_points(&mut r, na, 1.0), random_points(&mut r, nb, 1.0)));
    }
    let start = Instant::now();
    let got: Vec<(f64, f64)> = cases
        .iter()
        .map(|(a, b)| (chamfer(a, b).unwrap(), hausdorff(a, b).unwrap()))
        .collect();
    let elapsed = start.elapsed();
    for (i, ((a, b), (cd, hd))) in cases.iter().zip(got).enumerate() {
        let (want_cd, want_hd) = (brute_chamfer(a, b), brute_hausdorff(a, b));
        ensure!(rel(cd, want_cd) <= 1e-12, "pair {i}: chamfer {cd} vs {want_cd}");
        ensure!(rel(hd, want_hd) <= 1e-12, "pair {i}: hausdorff {hd} vs {want_hd}");
    }
    within(elapsed, 5.0, "200 pairs")
}

fn self_identity() -> Outcome {
    let fp = face_patch(16, 16);
    let conv = RegisteredConventions::default();
    for seed in 0..20 {
        let seq = noisy(&talking(&fp, 16, seed), seed, 0.05);
        let reg = evaluate_registered(&seq, &seq, &fp.mouth, &fp.upper_face, &fp.lips, &conv).unwrap();
        let mut values: Vec<(String, f64)> = reg.named().into_iter().map(|(k, v)| (k.to_string(), v)).collect();
        for l in &reg.per_landmark {
            for (k, v) in [("dtw", l.dtw), ("dfd", l.dfd), ("delta_m", l.delta_m), ("delta_cd", l.delta_cd)] {
                values.push((format!("{k}[{}]", l.vertex), v));
            }
        }
        values.push(("loss_mse".into(), loss_mse(&seq, &seq).unwrap()));
        values.push(("loss_masked_mse".into(), loss_masked_mse(&seq, &seq, &fp.mouth).unwrap()));
        values.push(("loss_velocity".into(), loss_velocity(&seq, &seq).unwrap()));
        values.push(("loss_cosine".into(), loss_cosine(&seq, &seq).unwrap()));
        values.push(("loss_dynamic_chamfer".into(), dynamic_chamfer(&seq, &seq).unwrap()));
        let un = evaluate_unregistered(&seq, &seq, &VarifoldOptions::default()).unwrap();
        values.push(("hd".into(), un.hd));
        values.push(("cd".into(), un.cd));
        for (k, v) in &values {
            ensure!(*v == 0.0, "seed {seed}: {k} = {v}");
        }
        ensure!(un.varifold.abs() <= 1e-12, "seed {seed}: varifold = {}", un.varifold);
        for v in un.per_frame_varifold {
            ensure!(v.abs() <= 1e-12, "seed {seed}: frame varifold = {v}");
        }
    }
    Ok(())
}

fn rigid_invariance() -> Outcome {
    let fp = face_patch(16, 16);
    let conv = RegisteredConventions::default();
    let mut r = rng(5);
    for trial in 0..20 {
        let gt = noisy(&talking(&fp, 20, trial), 100 + trial, 0.2);
        let pred = noisy(&talking(&fp, 20, 50 + trial), 200 + trial, 0.2);
        let rot = random_rotation(&mut r);
        let t = random_point(&mut r, 100.0);
        let (gt2, pred2) = (gt.map_vertices(|p| rot * p + t), pred.map_vertices(|p| rot * p + t));
        let a = evaluate_registered(&gt, &pred, &fp.mouth, &fp.upper_face, &fp.lips, &conv).unwrap();
        let b = evaluate_registered(&gt2, &pred2, &fp.mouth, &fp.upper_face, &fp.lips, &conv).unwrap();
        for ((k, x), (_, y)) in a.named().into_iter().zip(b.named()) {
            ensure!(x != 0.0, "trial {trial}: {k} is zero, the check would be vacuous");
            ensure!(rel(x, y) < 1e-9, "trial {trial}: {k} {x} vs {y}");
        }
    }
    Ok(())
}

fn operator_suite() -> Outcome {
    for (name, mesh) in fixtures() {
        let n = mesh.vertex_count();
        ensure!(n <= 500, "{name}: {n} vertices");
        let ops = precompute_operators(&mesh, 40).unwrap();
        let l = &ops.laplacian;
        ensure!(l.max_asymmetry() <= 1e-10, "{name}: asymmetry {}", l.max_asymmetry());
        let rs = l.row_sums().iter().fold(0.0f64, |a, s| a.max(s.abs()));
        ensure!(rs <= 1e-8, "{name}: row sum {rs}");
        let lmin = SymmetricEigen::new(l.to_dense()).eigenvalues.min();
        ensure!(lmin >= -1e-8, "{name}: lambda_min {lmin}");

        let m = DMatrix::from_diagonal(&DVector::from_column_slice(&ops.mass));
        let phi = &ops.eigenvectors;
        let k = phi.ncols();
        let gram = (phi.transpose() * &m * phi - DMatrix::identity(k, k)).amax();
        ensure!(gram <= 1e-8, "{name}: mass orthonormality {gram}");

        let mut r = rng(6);
        let u0: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        let heat0: f64 = u0.iter().zip(&ops.mass).map(|(u, m)| u * m).sum();
        for t in [1e-3, 0.1, 10.0] {
            let u = ops.heat_diffuse(&u0, t).unwrap();
            let heat: f64 = u.iter().zip(&ops.mass).map(|(u, m)| u * m).sum();
            ensure!(rel(heat, heat0) <= 1e-8, "{name}: heat at t={t} {heat} vs {heat0}");
        }

        let full = precompute_operators_with(
            &mesh,
            n,
            OperatorOptions {
                solver: EigenSolver::Dense,
                ..Default::default()
            },
        )
        .unwrap();
        let minv = DMatrix::from_diagonal(&DVector::from_iterator(n, full.mass.iter().map(|m| 1.0 / m)));
        let t = 0.05 * mesh.mean_edge_length().powi(2);
        let want = expm(&(-t * &minv * full.laplacian.to_dense())) * DVector::from_column_slice(&u0);
        let got = full.heat_diffuse(&u0, t).unwrap();
        let err = got.iter().zip(want.iter()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        ensure!(err <= 1e-6, "{name}: heat vs matrix exponential {err}");

        let boundary = mesh.boundary_vertices();
        for _ in 0..5 {
            let a = random_point(&mut r, 2.0);
            let u: Vec<f64> = mesh.vertices().iter().map(|p| a.dot(p) - 0.3).collect();
            let g = ops.gradient(&u).unwrap();
            for (i, f) in ops.tangent_frames.iter().enumerate().filter(|(i, _)| !boundary[*i]) {
                let e = (g[i][0] - a.dot(&f.e1)).abs().max((g[i][1] - a.dot(&f.e2)).abs());
                ensure!(e <= 1e-6, "{name}: gradient error {e} at vertex {i}");
            }
        }
    }
    Ok(())
}

fn flipped(mesh: &Mesh) -> Mesh {
    let faces = mesh.faces().iter().map(|&[a, b, c]| [a, c, b]).collect();
    Mesh::new(mesh.vertices().to_vec(), faces).unwrap()
}

fn varifold_suite() -> Outcome {
    ensure!(DEFAULT_SIGMA == 0.1, "default sigma {DEFAULT_SIGMA}");
    ensure!(VarifoldOptions::default().sigma == 0.1, "default options sigma");

    let opts = VarifoldOptions::default();
    let x = icosphere(3, 1.0);
    let rx = varifold_rep(&x).unwrap();
    let xx = varifold_inner(&rx, &rx, &opts).unwrap();
    let own = varifold_metric(&rx, &rx, &opts).unwrap();
    ensure!(own.abs() <= 1e-10 * xx, "self distance {own} vs <X,X> {xx}");

    let mut r = rng(7);
    let y = remesh_random(&x, &RemeshParams { seed: 3, ..Default::default() }).unwrap().mesh;
    let y = y.with_vertices(y.vertices().iter().map(|p| p * 1.05 + random_point(&mut r, 0.01)).collect()).unwrap();
    let ry = varifold_rep(&y).unwrap();
    let rf = varifold_rep(&flipped(&x)).unwrap();
    for o in [opts, VarifoldOptions::exact(0.1)] {
        let a = varifold_metric(&rx, &ry, &o).unwrap();
        let b = varifold_metric(&rf, &ry, &o).unwrap();
        ensure!((a - b).abs() <= 1e-10, "orientation flip {a} vs {b}");
    }

    let tri = |o: Vec3, s: f64| {
        Mesh::new(vec![o, o + Vec3::new(s, 0.0, 0.0), o + Vec3::new(0.0, s, 0.0)], vec![[0, 1, 2]]).unwrap()
    };
    let (ta, tb) = (tri(Vec3::zeros(), 1.0), tri(Vec3::new(50.0, 0.0, 0.0), 2.0));
    let (a, b) = (ta.face_area(0), tb.face_area(0));
    let (ra, rb) = (varifold_rep(&ta).unwrap(), varifold_rep(&tb).unwrap());
    for o in [opts, VarifoldOptions::exact(0.1)] {
        let d = varifold_metric(&ra, &rb, &o).unwrap();
        ensure!((d - (a * a + b * b)).abs() <= 1e-9, "two triangles {d} vs {}", a * a + b * b);
    }

    for sigma in [0.1, 0.25] {
        let exact = varifold_metric(&rx, &ry, &VarifoldOptions::exact(sigma)).unwrap();
        let trunc = varifold_metric(&rx, &ry, &VarifoldOptions { sigma, truncation: Some(4.0) }).unwrap();
        ensure!(rel(exact, trunc) <= 1e-6, "sigma {sigma}: exact {exact} vs truncated {trunc}");
        let ie = varifold_inner(&rx, &ry, &VarifoldOptions::exact(sigma)).unwrap();
        let it = varifold_inner(&rx, &ry, &VarifoldOptions { sigma, truncation: Some(4.0) }).unwrap();
        ensure!(rel(ie, it) <= 1e-6, "sigma {sigma}: inner {ie} vs {it}");
    }
    Ok(())
}

fn procrustes() -> Outcome {
    let mut r = rng(8);
    for trial in 0..50 {
        let src = random_points(&mut r, 30, 1.0);
        let rot: Matrix3<f64> = random_rotation(&mut r);
        let t = random_point(&mut r, 5.0);
        let s = r.random_range(0.5..2.0);
        let dst: Vec<Vec3> = src.iter().map(|p| s * (rot * p) + t).collect();
        let tf = fit_similarity(&src, &dst, true).unwrap();
        let geo = rotation_geodesic(&tf.rotation, &rot);
        ensure!(geo < 1e-8, "trial {trial}: rotation error {geo}");
        ensure!(rel(tf.scale, s) < 1e-8, "trial {trial}: scale {} vs {s}", tf.scale);
    }
    Ok(())
}

fn remesh_soundness() -> Outcome {
    let meshes = [icosphere(2, 1.0), face_patch(16, 16).mesh];
    for seed in 0..100u64 {
        let mesh = &meshes[seed as usize % 2];
        let out = remesh_random(mesh, &RemeshParams { seed, ..Default::default() }).unwrap();
        out.mesh.validate_strict().map_err(|e| format!("seed {seed}: {e}"))?;
        ensure!(out.mesh.zero_area_faces().is_empty(), "seed {seed}: zero-area faces");
        let hd = hausdorff(mesh.vertices(), out.mesh.vertices()).unwrap();
        let bound = 2.0 * mesh.max_edge_length();
        ensure!(hd <= bound, "seed {seed}: hausdorff {hd} > {bound}");
    }
    Ok(())
}

fn t4d(args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_t4d"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        out.status.success(),
        "t4d {} failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr)
    );
    Ok(out)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn report_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (gt, pred) = (dir.path().join("gt"), dir.path().join("pred"));
    for (d, seed) in [(&gt, "1"), (&pred, "2")] {
        t4d(&["synth", "--out", p(d), "--frames", "12", "--rows", "16", "--cols", "16", "--seed", seed])?;
    }
    let common_args = |out: &Path| {
        vec![
            "evaluate".to_string(),
            "--mode".into(),
            "registered".into(),
            "--gt".into(),
            p(&gt.join("frames")).into(),
            "--pred".into(),
            p(&pred.join("frames")).into(),
            "--mouth-mask".into(),
            p(&gt.join("mouth_mask.json")).into(),
            "--upper-mask".into(),
            p(&gt.join("upper_mask.json")).into(),
            "--lips".into(),
            p(&gt.join("lips.json")).into(),
            "--out".into(),
            p(out).into(),
        ]
    };
    let run = |out: &Path, extra: &[&str]| -> Result<String, String> {
        let mut a = common_args(out);
        a.extend(extra.iter().map(|s| s.to_string()));
        t4d(&a.iter().map(String::as_str).collect::<Vec<_>>())?;
        fs::read_to_string(out).map_err(|e| e.to_string())
    };
    let flags = ["--lve-reduction", "mean-max", "--dtw-band", "4", "--losses", "--sigma", "0.5"];
    let first = run(&dir.path().join("a.json"), &flags)?;
    let second = run(&dir.path().join("b.json"), &flags)?;
    ensure!(first == second, "two runs differ");
    let a_path = dir.path().join("a.json");
    let third = run(&dir.path().join("c.json"), &["--conventions-from", p(&a_path)])?;
    ensure!(third == first, "rerun from recorded conventions differs");

    let conv = Conventions::from_report_json(&first).map_err(|e| e.to_string())?;
    ensure!(conv.registered.lve_reduction.to_string() == "mean-max", "lve reduction {}", conv.registered.lve_reduction);
    ensure!(conv.registered.dtw_band == Some(4), "dtw band {:?}", conv.registered.dtw_band);
    ensure!(conv.losses && conv.varifold.sigma == 0.5, "losses/sigma not recorded");
    let back = serde_json::to_string(&conv).unwrap();
    ensure!(serde_json::from_str::<Conventions>(&back).unwrap() == conv, "conventions do not round-trip");
    let mut report = MetricReport::new(Mode::Registered, conv);
    report.sequences.push(SequenceEntry {
        id: "x".into(),
        ..Default::default()
    });
    let again = Conventions::from_report_json(&report.to_json().unwrap()).unwrap();
    ensure!(again == conv, "conventions metadata does not round-trip");

    let un = |out: &Path| -> Result<String, String> {
        let o = p(out).to_string();
        let (g, q) = (p(&gt.join("frames")).to_string(), p(&pred.join("frames")).to_string());
        t4d(&["evaluate", "--mode", "unregistered", "--gt", &g, "--pred", &q, "--out", &o])?;
        fs::read_to_string(out).map_err(|e| e.to_string())
    };
    ensure!(
        un(&dir.path().join("u1.json"))? == un(&dir.path().join("u2.json"))?,
        "unregistered runs differ"
    );
    Ok(())
}

fn report_scaling() -> Outcome {
    let expected = [("dtw", 1e-2), ("dfd", 1e-3), ("delta_m", 1e-6)];
    ensure!(TABLE_SCALES == expected, "scale table {TABLE_SCALES:?}");
    let mut report = MetricReport::new(Mode::Registered, Conventions::default());
    let raws = [("dtw", 0.0123), ("dfd", 0.004), ("delta_m", 3e-6), ("lve", 2.5), ("delta_cd", 0.125)];
    let mut e = SequenceEntry {
        id: "s".into(),
        ..Default::default()
    };
    for (k, v) in raws {
        e.metrics.insert(k.into(), v);
    }
    report.sequences.push(e);
    let csv = report.to_scaled_csv();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let cell = |h: &str| header.iter().position(|x| *x == h).map(|i| row[i]);
    for (h, want) in [
        ("DTW (x1e-2 mm)", "1.23"),
        ("DFD (x1e-3 mm)", "4"),
        ("delta_M (x1e-6 mm^2)", "3"),
        ("LVE (mm^2)", "2.5"),
        ("delta_Cd", "0.125"),
    ] {
        ensure!(cell(h) == Some(want), "column {h}: {:?} vs {want}", cell(h));
    }
    let mut r = rng(11);
    for _ in 0..200 {
        for (k, unit) in expected {
            let raw = r.random_range(1e-9..1.0) * unit * 1e3;
            let shown = scaled_value(k, raw);
            ensure!(shown == raw / unit, "{k}: {shown} vs {}", raw / unit);
            ensure!(rel(round_sig12(shown) * unit, raw) <= 1e-11, "{k}: rounding drifts");
        }
    }
    Ok(())
}

fn performance() -> Outcome {
    let fp = face_patch(71, 71);
    let v = fp.mesh.vertex_count();
    ensure!(v >= 5000, "{v} vertices");
    let gt = talking(&fp, 100, 1);
    let pred = noisy(&talking(&fp, 100, 2), 3, 0.1);
    let start = Instant::now();
    evaluate_registered(&gt, &pred, &fp.mouth, &fp.upper_face, &fp.lips, &RegisteredConventions::default())
        .map_err(|e| e.to_string())?;
    let reg = start.elapsed();
    let start = Instant::now();
    evaluate_unregistered(&gt, &pred, &VarifoldOptions::default()).map_err(|e| e.to_string())?;
    let un = start.elapsed();
    eprintln!(
        "    registered {:.2} s, unregistered {:.2} s on {} thread(s)",
        reg.as_secs_f64(),
        un.as_secs_f64(),
        rayon::current_num_threads()
    );
    within(reg, 5.0, "registered evaluation")?;
    within(un, 60.0, "unregistered evaluation")
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("DTW equals path enumeration", dtw_oracle),
        ("discrete Frechet equals coupling enumeration", frechet_oracle),
        ("Chamfer and Hausdorff equal brute force", chamfer_hausdorff_oracle),
        ("self-comparison is zero for every loss and metric", self_identity),
        ("registered metrics are rigid-invariant", rigid_invariance),
        ("operator suite on fixture meshes", operator_suite),
        ("varifold correctness", varifold_suite),
        ("Procrustes recovery", procrustes),
        ("remesh soundness", remesh_soundness),
        ("report determinism and conventions round-trip", report_determinism),
        ("report table scaling", report_scaling),
        ("performance floor", performance),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("[PASS] {:>2} {name} ({secs:.2} s)", i + 1),
            Err(e) => {
                failed += 1;
                println!("[FAIL] {:>2} {name} ({secs:.2} s): {e}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
