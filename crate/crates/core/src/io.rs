//! OBJ / ASCII PLY reading and writing, and directory-based sequence loading.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Mesh, MeshSequence, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeshFormat {
    Obj,
    Ply,
    #[default]
    Auto,
}

impl MeshFormat {
    fn resolve(self, path: &Path) -> Result<MeshFormat> {
        match self {
            MeshFormat::Auto => {
                let ext = path
                    .extension()
                    .and_then(|e| e.to_str())
                    .map(str::to_ascii_lowercase);
                match ext.as_deref() {
                    Some("obj") => Ok(MeshFormat::Obj),
                    Some("ply") => Ok(MeshFormat::Ply),
                    _ => Err(Error::invalid(format!(
                        "cannot infer mesh format from {}",
                        path.display()
                    ))),
                }
            }
            f => Ok(f),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Fan-split polygons with more than three corners instead of failing.
    pub triangulate: bool,
}

pub fn load_mesh(path: impl AsRef<Path>, format: MeshFormat) -> Result<Mesh> {
    load_mesh_with(path, format, LoadOptions::default())
}

pub fn load_mesh_with(path: impl AsRef<Path>, format: MeshFormat, opts: LoadOptions) -> Result<Mesh> {
    let path = path.as_ref();
    let format = format.resolve(path)?;
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if format == MeshFormat::Ply && bytes.starts_with(b"ply") {
        let head = String::from_utf8_lossy(&bytes[..bytes.len().min(256)]);
        if head.lines().any(|l| l.trim().starts_with("format binary")) {
            return Err(Error::Parse {
                path: path.into(),
                line: 2,
                message: "binary PLY is not supported; convert to ASCII PLY".into(),
            });
        }
    }
    let text = String::from_utf8(bytes).map_err(|_| Error::Parse {
        path: path.into(),
        line: 0,
        message: "file is not valid UTF-8 text".into(),
    })?;
    let mesh = match format {
        MeshFormat::Obj => parse_obj(&text, opts),
        MeshFormat::Ply => parse_ply(&text, opts),
        MeshFormat::Auto => unreachable!(),
    }
    .map_err(|(line, message)| Error::Parse {
        path: path.into(),
        line,
        message,
    })?;
    let (vertices, faces) = mesh;
    let mesh = Mesh::new(vertices, faces)?;
    let zero = mesh.zero_area_faces();
    if !zero.is_empty() {
        log::warn!(
            "{}: {} zero-area face(s), first is face {}",
            path.display(),
            zero.len(),
            zero[0]
        );
    }
    Ok(mesh)
}

type Parsed = (Vec<Vec3>, Vec<[usize; 3]>);
type ParseResult<T> = std::result::Result<T, (usize, String)>;

fn fan(poly: &[usize], line: usize, opts: LoadOptions, faces: &mut Vec<[usize; 3]>) -> ParseResult<()> {
    match poly.len() {
        0..=2 => Err((line, format!("face with {} corners", poly.len()))),
        3 => {
            faces.push([poly[0], poly[1], poly[2]]);
            Ok(())
        }
        n if opts.triangulate => {
            for i in 1..n - 1 {
                faces.push([poly[0], poly[i], poly[i + 1]]);
            }
            Ok(())
        }
        n => Err((
            line,
            format!("{n}-sided face; enable triangulation to fan-split polygons"),
        )),
    }
}

fn parse_f64(tok: Option<&str>, line: usize) -> ParseResult<f64> {
    let tok = tok.ok_or((line, "missing coordinate".to_string()))?;
    tok.parse::<f64>()
        .map_err(|_| (line, format!("invalid number {tok:?}")))
}

fn parse_obj(text: &str, opts: LoadOptions) -> ParseResult<Parsed> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut poly = Vec::with_capacity(4);
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let mut toks = raw.split_whitespace();
        match toks.next() {
            Some("v") => {
                let x = parse_f64(toks.next(), line)?;
                let y = parse_f64(toks.next(), line)?;
                let z = parse_f64(toks.next(), line)?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                poly.clear();
                for tok in toks {
                    let idx = tok.split('/').next().unwrap_or("");
                    let i: i64 = idx
                        .parse()
                        .map_err(|_| (line, format!("invalid face index {tok:?}")))?;
                    let resolved = match i.cmp(&0) {
                        Ordering::Greater => i - 1,
                        Ordering::Less => vertices.len() as i64 + i,
                        Ordering::Equal => return Err((line, "face index 0 is invalid in OBJ".into())),
                    };
                    if resolved < 0 {
                        return Err((line, format!("relative face index {i} before start of file")));
                    }
                    poly.push(resolved as usize);
                }
                fan(&poly, line, opts, &mut faces)?;
            }
            _ => {}
        }
    }
    Ok((vertices, faces))
}

struct PlyElement {
    name: String,
    count: usize,
    props: Vec<String>,
    list_prop: Option<String>,
}

fn parse_ply(text: &str, opts: LoadOptions) -> ParseResult<Parsed> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err((1, "missing 'ply' magic".into())),
    }
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut saw_format = false;
    loop {
        let (line, l) = lines.next().ok_or((0, "unterminated PLY header".to_string()))?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        match toks.as_slice() {
            ["format", "ascii", _] => saw_format = true,
            ["format", other, ..] => {
                return Err((line, format!("unsupported PLY format {other:?}; only ascii is supported")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| (line, format!("invalid element count {count:?}")))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                    list_prop: None,
                });
            }
            ["property", "list", _, _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or((line, "property before element".to_string()))?;
                el.list_prop = Some(name.to_string());
            }
            ["property", _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or((line, "property before element".to_string()))?;
                el.props.push(name.to_string());
            }
            ["end_header"] => break,
            _ => return Err((line, format!("unrecognized header line {l:?}"))),
        }
    }
    if !saw_format {
        return Err((0, "PLY header has no format line".into()));
    }

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut poly = Vec::new();
    for el in &elements {
        let axis = |n: &str| el.props.iter().position(|p| p == n);
        for _ in 0..el.count {
            let (line, l) = lines
                .next()
                .ok_or((0, format!("unexpected end of file in element {:?}", el.name)))?;
            let toks: Vec<&str> = l.split_whitespace().collect();
            match el.name.as_str() {
                "vertex" => {
                    let (x, y, z) = match (axis("x"), axis("y"), axis("z")) {
                        (Some(x), Some(y), Some(z)) => (x, y, z),
                        _ => return Err((line, "vertex element lacks x/y/z".into())),
                    };
                    let get = |i: usize| parse_f64(toks.get(i).copied(), line);
                    vertices.push(Vec3::new(get(x)?, get(y)?, get(z)?));
                }
                "face" if el.list_prop.is_some() => {
                    // list property is assumed to come first, as every common writer does
                    let n: usize = toks
                        .first()
                        .and_then(|t| t.parse().ok())
                        .ok_or((line, "invalid face count".to_string()))?;
                    if toks.len() < n + 1 {
                        return Err((line, "face line shorter than its count".into()));
                    }
                    poly.clear();
                    for t in &toks[1..=n] {
                        let i: usize = t
                            .parse()
                            .map_err(|_| (line, format!("invalid face index {t:?}")))?;
                        poly.push(i);
                    }
                    fan(&poly, line, opts, &mut faces)?;
                }
                _ => {}
            }
        }
    }
    Ok((vertices, faces))
}

/// Formats with 9 significant digits, without exponent for ordinary magnitudes.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let s = format!("{x:.8e}");
    let (mant, exp) = s.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-5..=15).contains(&exp) {
        return s;
    }
    let neg = mant.starts_with('-');
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let mut out = String::with_capacity(24);
    if neg {
        out.push('-');
    }
    if exp < 0 {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(&digits);
    } else {
        let int_len = exp as usize + 1;
        if int_len >= digits.len() {
            out.push_str(&digits);
            for _ in digits.len()..int_len {
                out.push('0');
            }
        } else {
            out.push_str(&digits[..int_len]);
            out.push('.');
            out.push_str(&digits[int_len..]);
        }
    }
    if out.contains('.') {
        while out.ends_with('0') {
            out.pop();
        }
        if out.ends_with('.') {
            out.pop();
        }
    }
    out
}

pub fn mesh_to_obj(mesh: &Mesh) -> String {
    let mut s = String::with_capacity(mesh.vertex_count() * 40 + mesh.face_count() * 20);
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", format_sig9(v.x), format_sig9(v.y), format_sig9(v.z));
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn mesh_to_ply(mesh: &Mesh) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\n\
         element face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertex_count(),
        mesh.face_count()
    );
    for v in mesh.vertices() {
        let _ = writeln!(s, "{} {} {}", format_sig9(v.x), format_sig9(v.y), format_sig9(v.z));
    }
    for f in mesh.faces() {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

pub fn save_mesh(mesh: &Mesh, path: impl AsRef<Path>, format: MeshFormat) -> Result<()> {
    let path = path.as_ref();
    let text = match format.resolve(path)? {
        MeshFormat::Obj => mesh_to_obj(mesh),
        _ => mesh_to_ply(mesh),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Natural ordering: digit runs compare numerically, everything else bytewise.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (ab, bb) = (a.as_bytes(), b.as_bytes());
    let (mut i, mut j) = (0, 0);
    while i < ab.len() && j < bb.len() {
        if ab[i].is_ascii_digit() && bb[j].is_ascii_digit() {
            let si = i;
            while i < ab.len() && ab[i].is_ascii_digit() {
                i += 1;
            }
            let sj = j;
            while j < bb.len() && bb[j].is_ascii_digit() {
                j += 1;
            }
            let na = trim_zeros(&ab[si..i]);
            let nb = trim_zeros(&bb[sj..j]);
            let ord = na.len().cmp(&nb.len()).then_with(|| na.cmp(nb));
            if ord != Ordering::Equal {
                return ord;
            }
        } else {
            if ab[i] != bb[j] {
                return ab[i].cmp(&bb[j]);
            }
            i += 1;
            j += 1;
        }
    }
    (ab.len() - i).cmp(&(bb.len() - j)).then_with(|| a.cmp(b))
}

fn trim_zeros(s: &[u8]) -> &[u8] {
    let k = s.iter().position(|&c| c != b'0').unwrap_or(s.len());
    &s[k..]
}

/// Lists regular files in `dir` whose names match `pattern`, in natural order.
pub fn list_frames(dir: impl AsRef<Path>, pattern: &str) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    let pat = glob::Pattern::new(pattern)
        .map_err(|e| Error::invalid(format!("bad filename pattern {pattern:?}: {e}")))?;
    let mut names = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if !path.is_file() {
            continue;
        }
        if let Some(name) = path.file_name().and_then(|n| n.to_str()) {
            if pat.matches(name) {
                names.push(name.to_string());
            }
        }
    }
    names.sort_by(|a, b| natural_cmp(a, b));
    Ok(names.into_iter().map(|n| dir.join(n)).collect())
}

pub fn load_sequence(dir: impl AsRef<Path>, pattern: &str, fps: f64) -> Result<MeshSequence> {
    load_sequence_with(dir, pattern, fps, LoadOptions::default())
}

pub fn load_sequence_with(
    dir: impl AsRef<Path>,
    pattern: &str,
    fps: f64,
    opts: LoadOptions,
) -> Result<MeshSequence> {
    let dir = dir.as_ref();
    let paths = list_frames(dir, pattern)?;
    if paths.is_empty() {
        return Err(Error::Empty(format!(
            "no files matching {pattern:?} in {}",
            dir.display()
        )));
    }
    let frames = paths
        .par_iter()
        .map(|p| load_mesh_with(p, MeshFormat::Auto, opts))
        .collect::<Result<Vec<_>>>()?;
    MeshSequence::new(frames, fps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn minimal_obj() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "t.obj", "# tri\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1\n");
        let m = load_mesh(&p, MeshFormat::Auto).unwrap();
        assert_eq!((m.vertex_count(), m.face_count()), (3, 1));
        assert_eq!(m.faces()[0], [0, 1, 2]);
    }

    #[test]
    fn quad_needs_triangulation_flag() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "q.obj", "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
        assert!(matches!(load_mesh(&p, MeshFormat::Obj), Err(Error::Parse { line: 5, .. })));
        let m = load_mesh_with(&p, MeshFormat::Obj, LoadOptions { triangulate: true }).unwrap();
        assert_eq!(m.faces(), &[[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn negative_obj_indices() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "n.obj", "v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n");
        assert_eq!(load_mesh(&p, MeshFormat::Obj).unwrap().faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn ply_out_of_range_index() {
        let d = tempfile::tempdir().unwrap();
        let body = "ply\nformat ascii 1.0\nelement vertex 4\nproperty float x\nproperty float y\nproperty float z\n\
                    element face 1\nproperty list uchar int vertex_indices\nend_header\n\
                    0 0 0\n1 0 0\n0 1 0\n0 0 1\n3 0 1 5\n";
        let p = write(d.path(), "bad.ply", body);
        assert!(matches!(
            load_mesh(&p, MeshFormat::Auto),
            Err(Error::IndexOutOfRange { index: 5, count: 4 })
        ));
    }

    #[test]
    fn ply_with_extra_properties() {
        let d = tempfile::tempdir().unwrap();
        let body = "ply\nformat ascii 1.0\ncomment x\nelement vertex 3\nproperty float nx\nproperty float x\n\
                    property float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_index\n\
                    end_header\n9 0 0 0\n9 1 0 0\n9 0 1 0\n3 0 1 2\n";
        let p = write(d.path(), "ok.ply", body);
        let m = load_mesh(&p, MeshFormat::Auto).unwrap();
        assert_eq!(m.vertices()[1], Vec3::new(1., 0., 0.));
    }

    #[test]
    fn binary_ply_rejected() {
        let d = tempfile::tempdir().unwrap();
        let p = write(d.path(), "b.ply", "ply\nformat binary_little_endian 1.0\nend_header\n");
        let err = load_mesh(&p, MeshFormat::Auto).unwrap_err();
        assert!(err.to_string().contains("binary PLY"));
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(-2.5), "-2.5");
        assert_eq!(format_sig9(123456789.0), "123456789");
        assert_eq!(format_sig9(1.0 / 3.0), "0.333333333");
        assert_eq!(format_sig9(0.000123), "0.000123");
        assert_eq!(format_sig9(1e20), "1.00000000e20");
        for x in [0.1, 12.75, -0.0042, 98765.4321] {
            assert_eq!(format_sig9(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn natural_order() {
        let mut v = vec!["f10.obj", "f2.obj", "f1.obj", "f02.obj", "g.obj"];
        v.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(v, ["f1.obj", "f02.obj", "f2.obj", "f10.obj", "g.obj"]);
    }

    #[test]
    fn sequence_loading() {
        let d = tempfile::tempdir().unwrap();
        assert!(matches!(load_sequence(d.path(), "*.obj", 30.0), Err(Error::Empty(_))));
        let tri = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n";
        let quad = "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 1 1 0\nf 1 2 3\nf 2 4 3\n";
        write(d.path(), "frame_10.obj", tri);
        write(d.path(), "frame_2.obj", quad);
        write(d.path(), "frame_1.obj", tri);
        write(d.path(), "notes.txt", "x");
        let s = load_sequence(d.path(), "frame_*.obj", 25.0).unwrap();
        assert_eq!(s.len(), 3);
        assert!(!s.is_homogeneous());
        assert_eq!(s.frames()[1].vertex_count(), 4);
    }
}
