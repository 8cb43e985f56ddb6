use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};
use t4d_core::io::{list_frames, load_mesh_with, natural_cmp};
use t4d_core::losses::{dynamic_chamfer, loss_cosine, loss_masked_mse, loss_mse, loss_velocity};
use t4d_core::{
    evaluate_registered, evaluate_unregistered, load_lips, load_mask, Conventions, LipLandmarkSet,
    Error, LoadOptions, Mesh, MeshFormat, MeshSequence, MetricReport, Mode, SequenceEntry, VertexMask,
};

use crate::{ctx, write_file, CliError, CliResult, EvalMode, EvaluateArgs, SequenceInput};

pub struct SequencePair {
    pub id: String,
    pub gt: PathBuf,
    pub pred: PathBuf,
}

fn is_mesh_file(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("obj") || e.eq_ignore_ascii_case("ply"))
}

pub fn mesh_files(dir: &Path, pattern: &str) -> CliResult<Vec<PathBuf>> {
    Ok(list_frames(dir, pattern)?
        .into_iter()
        .filter(|p| is_mesh_file(p))
        .collect())
}

fn dir_name(p: &Path) -> String {
    p.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| p.display().to_string())
}

/// A directory holding frames is one sequence; otherwise each subdirectory
/// holding frames is one.
fn sequence_dirs(root: &Path, pattern: &str) -> CliResult<Vec<(String, PathBuf)>> {
    if !root.is_dir() {
        return Err(CliError::input(format!("{}: not a directory", root.display())));
    }
    if !mesh_files(root, pattern)?.is_empty() {
        return Ok(vec![(dir_name(root), root.to_path_buf())]);
    }
    let mut subdirs = Vec::new();
    let entries = fs::read_dir(root).map_err(|e| CliError::input(format!("{}: {e}", root.display())))?;
    for entry in entries {
        let path = entry
            .map_err(|e| CliError::input(format!("{}: {e}", root.display())))?
            .path();
        if path.is_dir() && !mesh_files(&path, pattern)?.is_empty() {
            subdirs.push((dir_name(&path), path));
        }
    }
    if subdirs.is_empty() {
        return Err(CliError::input(format!(
            "{}: no mesh frames matching {pattern:?}",
            root.display()
        )));
    }
    subdirs.sort_by(|a, b| match natural_cmp(&a.0, &b.0) {
        Ordering::Equal => a.0.cmp(&b.0),
        o => o,
    });
    Ok(subdirs)
}

pub fn pair_sequences(input: &SequenceInput) -> CliResult<Vec<SequencePair>> {
    let gt = sequence_dirs(&input.gt, &input.pattern)?;
    let pred = sequence_dirs(&input.pred, &input.pattern)?;
    if gt.len() != pred.len() {
        return Err(CliError::input(format!(
            "sequence count mismatch: {} has {}, {} has {}",
            input.gt.display(),
            gt.len(),
            input.pred.display(),
            pred.len()
        )));
    }
    if gt.len() == 1 {
        let (id, g) = gt.into_iter().next().unwrap();
        return Ok(vec![SequencePair {
            id,
            gt: g,
            pred: pred.into_iter().next().unwrap().1,
        }]);
    }
    gt.into_iter()
        .map(|(id, g)| {
            let p = pred
                .iter()
                .find(|(pid, _)| *pid == id)
                .ok_or_else(|| CliError::input(format!("sequence {id}: no matching directory under {}", input.pred.display())))?;
            Ok(SequencePair {
                id,
                gt: g,
                pred: p.1.clone(),
            })
        })
        .collect()
}

/// Loads one frame; validation errors are prefixed with the file name, which
/// I/O and parse errors already carry.
pub fn load_frame(path: &Path, opts: LoadOptions) -> CliResult<Mesh> {
    load_mesh_with(path, MeshFormat::Auto, opts).map_err(|e| match e {
        Error::Io { .. } | Error::Parse { .. } => CliError::from(e),
        e => ctx(path)(e),
    })
}

pub fn load_sequence(dir: &Path, input: &SequenceInput) -> CliResult<MeshSequence> {
    let files = mesh_files(dir, &input.pattern)?;
    let opts = LoadOptions {
        triangulate: input.triangulate,
    };
    let frames = files
        .par_iter()
        .map(|p| load_frame(p, opts))
        .collect::<CliResult<Vec<_>>>()?;
    Ok(MeshSequence::new(frames, input.fps)?)
}

fn load_pair(pair: &SequencePair, input: &SequenceInput) -> CliResult<(MeshSequence, MeshSequence)> {
    let gt = load_sequence(&pair.gt, input).map_err(|e| e.context("ground truth"))?;
    let pred = load_sequence(&pair.pred, input).map_err(|e| e.context("prediction"))?;
    Ok((gt, pred))
}

fn resolve_conventions(args: &EvaluateArgs) -> CliResult<Conventions> {
    let mut c = match &args.conventions_from {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::input(format!("{}: {e}", p.display())))?;
            Conventions::from_report_json(&text).map_err(|e| CliError::from(e).context(&p.display().to_string()))?
        }
        None => Conventions::default(),
    };
    if let Some(r) = args.lve_reduction {
        c.registered.lve_reduction = r;
    }
    if let Some(r) = args.mve_reduction {
        c.registered.mve_reduction = r;
    }
    if args.dtw_band.is_some() {
        c.registered.dtw_band = args.dtw_band;
    }
    if let Some(s) = args.sigma {
        c.varifold.sigma = s;
    }
    if args.exact_varifold {
        c.varifold.truncation = None;
    } else if args.truncation.is_some() {
        c.varifold.truncation = args.truncation;
    }
    c.losses |= args.losses;
    Ok(c)
}

struct RegisteredInputs {
    mouth: VertexMask,
    upper: VertexMask,
    lips: LipLandmarkSet,
}

fn required<'a>(p: &'a Option<PathBuf>, flag: &str) -> CliResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| CliError::input(format!("registered mode needs {flag}")))
}

fn load_registered_inputs(args: &EvaluateArgs, vertex_count: usize) -> CliResult<RegisteredInputs> {
    let mouth_p = required(&args.mouth_mask, "--mouth-mask")?;
    let upper_p = required(&args.upper_mask, "--upper-mask")?;
    let lips_p = required(&args.lips, "--lips")?;
    Ok(RegisteredInputs {
        mouth: load_mask(mouth_p, vertex_count).map_err(ctx(mouth_p))?,
        upper: load_mask(upper_p, vertex_count).map_err(ctx(upper_p))?,
        lips: load_lips(lips_p, vertex_count).map_err(ctx(lips_p))?,
    })
}

fn evaluate_pair(
    args: &EvaluateArgs,
    conv: &Conventions,
    reg: Option<&RegisteredInputs>,
    pair: &SequencePair,
) -> CliResult<SequenceEntry> {
    let (gt, pred) = load_pair(pair, &args.input)?;
    let mut entry = SequenceEntry {
        id: pair.id.clone(),
        ..Default::default()
    };
    match args.mode {
        EvalMode::Registered => {
            let inp = reg.expect("registered inputs loaded");
            let m = evaluate_registered(&gt, &pred, &inp.mouth, &inp.upper, &inp.lips, &conv.registered)?;
            for (k, x) in m.named() {
                entry.metrics.insert(k.into(), x);
            }
            let col = |f: fn(&t4d_core::registered::LandmarkMetrics) -> f64| m.per_landmark.iter().map(f).collect();
            entry.per_landmark.insert("dtw".into(), col(|l| l.dtw));
            entry.per_landmark.insert("dfd".into(), col(|l| l.dfd));
            entry.per_landmark.insert("delta_m".into(), col(|l| l.delta_m));
            entry.per_landmark.insert("delta_cd".into(), col(|l| l.delta_cd));
            if conv.losses {
                entry.metrics.insert("loss_mse".into(), loss_mse(&gt, &pred)?);
                entry
                    .metrics
                    .insert("loss_masked_mse".into(), loss_masked_mse(&gt, &pred, &inp.mouth)?);
                entry.metrics.insert("loss_velocity".into(), loss_velocity(&gt, &pred)?);
                entry.metrics.insert("loss_cosine".into(), loss_cosine(&gt, &pred)?);
                entry
                    .metrics
                    .insert("loss_dynamic_chamfer".into(), dynamic_chamfer(&gt, &pred)?);
            }
        }
        EvalMode::Unregistered => {
            let m = evaluate_unregistered(&gt, &pred, &conv.varifold)?;
            for (k, x) in m.named() {
                entry.metrics.insert(k.into(), x);
            }
            entry.per_frame.insert("hd".into(), m.per_frame_hd);
            entry.per_frame.insert("cd".into(), m.per_frame_cd);
            entry.per_frame.insert("varifold".into(), m.per_frame_varifold);
            if conv.losses {
                entry
                    .metrics
                    .insert("loss_dynamic_chamfer".into(), dynamic_chamfer(&gt, &pred)?);
            }
        }
    }
    Ok(entry)
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn metadata(
    args: &EvaluateArgs,
    pairs: &[SequencePair],
    reg: Option<&RegisteredInputs>,
    report: &mut MetricReport,
) {
    let md = &mut report.metadata;
    md.insert(
        "inputs".into(),
        json!({
            "gt": path_str(&args.input.gt),
            "pred": path_str(&args.input.pred),
            "pattern": args.input.pattern,
            "fps": args.input.fps,
            "triangulate": args.input.triangulate,
            "sequence_count": pairs.len(),
        }),
    );
    md.insert("seed".into(), Value::Null);
    md.insert(
        "alignment".into(),
        Value::from("none: inputs are compared as given (t4d align fits one transform per sequence on its neutral or first frame)"),
    );
    let mut notes = serde_json::Map::new();
    match args.mode {
        EvalMode::Registered => {
            notes.insert(
                "trajectories".into(),
                Value::from("dtw, dfd, delta_m, delta_cd are unweighted means over the six lip landmarks, upper lip first"),
            );
            notes.insert(
                "fdd".into(),
                Value::from("signed mean of gt minus pred upper-face motion std; fdd_abs is its magnitude"),
            );
            let inp = reg.expect("registered inputs loaded");
            let mask = |m: &VertexMask, p: &Option<PathBuf>| {
                json!({ "label": m.label(), "path": p.as_deref().map(path_str), "count": m.len() })
            };
            md.insert(
                "masks".into(),
                json!({
                    "mouth": mask(&inp.mouth, &args.mouth_mask),
                    "upper_face": mask(&inp.upper, &args.upper_mask),
                    "lips": {
                        "path": args.lips.as_deref().map(path_str),
                        "upper": inp.lips.upper(),
                        "lower": inp.lips.lower(),
                    },
                }),
            );
        }
        EvalMode::Unregistered => {
            notes.insert(
                "hausdorff".into(),
                Value::from("symmetric Hausdorff over vertex sets, not surfaces"),
            );
            notes.insert("frames".into(), Value::from("hd, cd, varifold are means of the per-frame values"));
            md.insert("masks".into(), json!({}));
        }
    }
    md.insert("notes".into(), Value::Object(notes));
}

pub fn run(args: &EvaluateArgs) -> CliResult<()> {
    let conv = resolve_conventions(args)?;
    let pairs = pair_sequences(&args.input)?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs {
        if j == 0 {
            return Err(CliError::input("--jobs must be at least 1"));
        }
        builder = builder.num_threads(j);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::input(format!("cannot start worker pool: {e}")))?;
    // masks are bound to the vertex count of the first ground-truth frame
    let reg = match args.mode {
        EvalMode::Registered => {
            let first = mesh_files(&pairs[0].gt, &args.input.pattern)?;
            let opts = LoadOptions {
                triangulate: args.input.triangulate,
            };
            let v = load_mesh_with(&first[0], MeshFormat::Auto, opts)?.vertex_count();
            Some(load_registered_inputs(args, v)?)
        }
        EvalMode::Unregistered => None,
    };
    let results: Vec<CliResult<SequenceEntry>> = pool.install(|| {
        pairs
            .par_iter()
            .map(|p| evaluate_pair(args, &conv, reg.as_ref(), p).map_err(|e| e.context(&format!("sequence {}", p.id))))
            .collect()
    });

    let mode = match args.mode {
        EvalMode::Registered => Mode::Registered,
        EvalMode::Unregistered => Mode::Unregistered,
    };
    let mut report = MetricReport::new(mode, conv);
    for r in results {
        report.sequences.push(r?);
    }
    metadata(args, &pairs, reg.as_ref(), &mut report);
    let json = report.to_json()?;
    write_file(&args.out, &json)?;
    if let Some(csv) = &args.csv {
        write_file(csv, &report.to_scaled_csv())?;
    }
    for (k, s) in report.aggregate() {
        log::info!("{k}: mean {} std {}", s.mean, s.std);
    }
    Ok(())
}
