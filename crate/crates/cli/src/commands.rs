use std::env;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde_json::json;
use t4d_core::io::{format_sig9, mesh_to_obj};
use t4d_core::primitives::face_patch;
use t4d_core::surf_ops::{
    cache_file_name, load_operators, precompute_operators_with, save_operators, EigenSolver,
};
use t4d_core::tools::align::{align_rigid, align_sequence, SimilarityTransform};
use t4d_core::tools::mds::mds_project;
use t4d_core::tools::remesh::{remesh_random, RemeshParams};
use t4d_core::tools::synth::{synth_talking_sequence, SynthParams};
use t4d_core::{load_lips, load_mesh, save_mesh, LoadOptions, MeshFormat, MeshSequence, OperatorOptions};

use crate::evaluate::{load_frame, mesh_files};
use crate::{ctx, write_file, AlignArgs, CliError, CliResult, MdsArgs, OperatorsArgs, RemeshArgs, SolverArg, SynthArgs};

pub fn operators(a: &OperatorsArgs) -> CliResult<()> {
    let mesh = load_mesh(&a.mesh, MeshFormat::Auto)?;
    let out = match (&a.out, env::var_os("T4D_CACHE_DIR")) {
        (Some(p), _) => p.clone(),
        (None, Some(dir)) => PathBuf::from(dir).join(cache_file_name(&mesh, a.k)),
        (None, None) => return Err(CliError::input("give --out or set T4D_CACHE_DIR")),
    };
    if !a.force && out.exists() {
        match load_operators(&out, Some((&mesh, a.k))) {
            Ok(ops) if ops.clamp_cotangents == a.clamp_cot => {
                println!("{}: cached operators are current", out.display());
                return Ok(());
            }
            Ok(_) => log::info!("{}: cached with other cotangent clamping, recomputing", out.display()),
            Err(e) => log::info!("{}: not reusable ({e}), recomputing", out.display()),
        }
    }
    let opts = OperatorOptions {
        clamp_cotangents: a.clamp_cot,
        solver: match a.solver {
            SolverArg::Auto => EigenSolver::Auto,
            SolverArg::Dense => EigenSolver::Dense,
            SolverArg::ShiftInvert => EigenSolver::ShiftInvert,
        },
    };
    let ops = precompute_operators_with(&mesh, a.k, opts).map_err(ctx(&a.mesh))?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
    }
    save_operators(&ops, &out)?;
    println!(
        "{}: {} vertices, k = {}, eigenvalues {} .. {}",
        out.display(),
        mesh.vertex_count(),
        a.k,
        format_sig9(ops.eigenvalues[0]),
        format_sig9(*ops.eigenvalues.last().unwrap())
    );
    Ok(())
}

fn transform_json(tf: &SimilarityTransform, residual: Option<f64>) -> serde_json::Value {
    let r = tf.rotation;
    json!({
        "rotation": (0..3).map(|i| (0..3).map(|j| r[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "translation": [tf.translation.x, tf.translation.y, tf.translation.z],
        "scale": tf.scale,
        "residual": residual,
    })
}

pub fn align(a: &AlignArgs) -> CliResult<()> {
    let reference = load_mesh(&a.reference, MeshFormat::Auto).map_err(ctx(&a.reference))?;
    let summary = if a.source.is_dir() {
        let files = mesh_files(&a.source, &a.pattern)?;
        if files.is_empty() {
            return Err(CliError::input(format!("{}: no mesh frames", a.source.display())));
        }
        let frames = files
            .iter()
            .map(|p| load_frame(p, LoadOptions::default()))
            .collect::<CliResult<Vec<_>>>()?;
        let seq = MeshSequence::new(frames, 30.0)?;
        let (aligned, tf) = align_sequence(&seq, &reference, a.scale)?;
        std::fs::create_dir_all(&a.out).map_err(|e| CliError::input(format!("{}: {e}", a.out.display())))?;
        for (path, mesh) in files.iter().zip(aligned.frames()) {
            save_mesh(mesh, a.out.join(path.file_name().unwrap()), MeshFormat::Auto)?;
        }
        transform_json(&tf, None)
    } else {
        let source = load_mesh(&a.source, MeshFormat::Auto).map_err(ctx(&a.source))?;
        let al = align_rigid(&source, &reference, a.scale)?;
        save_mesh(&al.mesh, &a.out, MeshFormat::Auto)?;
        transform_json(&al.transform, Some(al.residual))
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("json"));
    Ok(())
}

pub fn remesh(a: &RemeshArgs) -> CliResult<()> {
    let mesh = load_mesh(&a.mesh, MeshFormat::Auto).map_err(ctx(&a.mesh))?;
    let params = RemeshParams {
        up_fraction: a.up,
        down_ratio: a.down,
        seed: a.seed,
    };
    let r = remesh_random(&mesh, &params).map_err(ctx(&a.mesh))?;
    for w in &r.warnings {
        log::warn!("{w}");
    }
    save_mesh(&r.mesh, &a.out, MeshFormat::Auto)?;
    println!(
        "{} -> {} vertices, {} faces, {} collapses{}",
        mesh.vertex_count(),
        r.mesh.vertex_count(),
        r.mesh.face_count(),
        r.collapses,
        if r.reached_target { "" } else { " (target not reached)" }
    );
    Ok(())
}

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let (template, lips, masks) = match (&a.template, &a.lips) {
        (Some(t), Some(l)) => {
            let mesh = load_mesh(t, MeshFormat::Auto).map_err(ctx(t))?;
            let lips = load_lips(l, mesh.vertex_count()).map_err(ctx(l))?;
            (mesh, lips, None)
        }
        _ => {
            if a.rows < 8 || a.cols < 8 {
                return Err(CliError::input("--rows and --cols must be at least 8"));
            }
            let fp = face_patch(a.rows, a.cols);
            (fp.mesh, fp.lips, Some((fp.mouth, fp.upper_face)))
        }
    };
    let params = SynthParams {
        frames: a.frames,
        fps: a.fps,
        amplitude: a.amplitude,
        seed: a.seed,
    };
    let seq = synth_talking_sequence(&template, &lips, params)?;
    write_file(&a.out.join("template.obj"), &mesh_to_obj(&template))?;
    write_file(&a.out.join("lips.json"), &lips.to_json())?;
    if let Some((mouth, upper)) = masks {
        write_file(&a.out.join("mouth_mask.json"), &mouth.to_json())?;
        write_file(&a.out.join("upper_mask.json"), &upper.to_json())?;
    }
    let width = a.frames.saturating_sub(1).to_string().len().max(4);
    for (t, m) in seq.frames().iter().enumerate() {
        write_file(&a.out.join("frames").join(format!("frame_{t:0width$}.obj")), &mesh_to_obj(m))?;
    }
    println!(
        "{}: {} frames of {} vertices",
        a.out.display(),
        seq.len(),
        template.vertex_count()
    );
    Ok(())
}

fn read_matrix(path: &Path) -> CliResult<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| CliError::input(format!("{}:{}: not a number: {f:?}", path.display(), i + 1)))
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
        return Err(CliError::input(format!(
            "{}:{}: expected {n} values, found {}",
            path.display(),
            i + 1,
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

pub fn mds(a: &MdsArgs) -> CliResult<()> {
    let d = read_matrix(&a.input)?;
    let x = mds_project(&d, a.dims).map_err(ctx(&a.input))?;
    let mut out = String::new();
    for i in 0..x.nrows() {
        let row: Vec<String> = (0..x.ncols()).map(|j| format_sig9(x[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_file(&a.out, &out)
}
