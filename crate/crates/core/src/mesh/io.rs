//! ASCII mesh readers (OFF, OBJ, PLY) and the diagnosis PLY writer.
//!
//! Readers take positions and faces only; every other attribute is skipped.
//! Polygonal faces with more than three vertices are fan-triangulated.
//! The writer emits `float x,y,z`, a `float quality` scalar channel and,
//! when a flag mask is given, `uchar red,green,blue` per vertex
//! (flagged = yellow 255,255,0, otherwise dark 48,48,48).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::{MeshError, TriangleMesh, VertexMask};

pub const FLAGGED_RGB: [u8; 3] = [255, 255, 0];
pub const UNFLAGGED_RGB: [u8; 3] = [48, 48, 48];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Off,
    Obj,
    PlyAscii,
}

impl MeshFormat {
    /// Picks a format from a file extension (`off`, `obj`, `ply`).
    pub fn from_path(path: &Path) -> Option<MeshFormat> {
        match path
            .extension()?
            .to_str()?
            .to_ascii_lowercase()
            .as_str()
        {
            "off" => Some(MeshFormat::Off),
            "obj" => Some(MeshFormat::Obj),
            "ply" => Some(MeshFormat::PlyAscii),
            _ => None,
        }
    }
}

/// Loads and validates a mesh; vertex order is preserved from the file.
pub fn load_mesh(path: &Path, format: MeshFormat) -> Result<TriangleMesh, MeshError> {
    let file = File::open(path).map_err(MeshError::Io)?;
    let reader = BufReader::new(file);
    let name = path
        .file_stem()
        .and_then(|s| s.to_str())
        .map(|s| s.to_string());
    let (vertices, faces) = match format {
        MeshFormat::Off => parse_off(reader, path)?,
        MeshFormat::Obj => parse_obj(reader, path)?,
        MeshFormat::PlyAscii => parse_ply(reader, path)?,
    };
    TriangleMesh::new(vertices, faces, name)
}

struct LineSource<R: BufRead> {
    reader: R,
    line_no: usize,
    path: String,
}

impl<R: BufRead> LineSource<R> {
    fn new(reader: R, path: &Path) -> Self {
        LineSource {
            reader,
            line_no: 0,
            path: path.display().to_string(),
        }
    }

    /// Next non-empty, non-comment line (`#` comments for OFF/OBJ).
    fn next_content_line(&mut self, strip_comments: bool) -> Result<Option<String>, MeshError> {
        let mut buf = String::new();
        loop {
            buf.clear();
            self.line_no += 1;
            let n = self.reader.read_line(&mut buf).map_err(MeshError::Io)?;
            if n == 0 {
                return Ok(None);
            }
            let mut line = buf.trim();
            if strip_comments {
                if let Some(pos) = line.find('#') {
                    line = line[..pos].trim();
                }
            }
            if !line.is_empty() {
                return Ok(Some(line.to_string()));
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> MeshError {
        MeshError::Parse {
            path: self.path.clone(),
            line: self.line_no,
            message: message.into(),
        }
    }
}

fn fan_triangulate(poly: &[usize], out: &mut Vec<[usize; 3]>) {
    for i in 1..poly.len() - 1 {
        out.push([poly[0], poly[i], poly[i + 1]]);
    }
}

type Geometry = (Vec<[f64; 3]>, Vec<[usize; 3]>);

fn parse_off<R: BufRead>(reader: R, path: &Path) -> Result<Geometry, MeshError> {
    let mut src = LineSource::new(reader, path);
    let mut header = src
        .next_content_line(true)?
        .ok_or_else(|| src.err("empty file"))?;
    if header == "OFF" {
        header = src
            .next_content_line(true)?
            .ok_or_else(|| src.err("missing count line"))?;
    } else if let Some(rest) = header.strip_prefix("OFF") {
        // counts may share the header line
        header = rest.trim().to_string();
    }
    let counts: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| src.err(format!("bad count '{t}'"))))
        .collect::<Result<_, _>>()?;
    if counts.len() < 2 {
        return Err(src.err("count line needs at least vertex and face counts"));
    }
    let (nv, nf) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let line = src
            .next_content_line(true)?
            .ok_or_else(|| src.err("unexpected end of file in vertex list"))?;
        vertices.push(parse_point(&line).ok_or_else(|| src.err("bad vertex line"))?);
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let line = src
            .next_content_line(true)?
            .ok_or_else(|| src.err("unexpected end of file in face list"))?;
        let idx: Vec<usize> = line
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| src.err(format!("bad index '{t}'"))))
            .collect::<Result<_, _>>()?;
        if idx.is_empty() || idx.len() != idx[0] + 1 || idx[0] < 3 {
            return Err(src.err("face line must be 'k i0 ... ik-1' with k >= 3"));
        }
        fan_triangulate(&idx[1..], &mut faces);
    }
    Ok((vertices, faces))
}

fn parse_obj<R: BufRead>(reader: R, path: &Path) -> Result<Geometry, MeshError> {
    let mut src = LineSource::new(reader, path);
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    while let Some(line) = src.next_content_line(true)? {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let rest: Vec<&str> = tokens.collect();
                let point =
                    parse_point(&rest.join(" ")).ok_or_else(|| src.err("bad 'v' line"))?;
                vertices.push(point);
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tokens {
                    let first = t.split('/').next().unwrap_or("");
                    let i: i64 = first
                        .parse()
                        .map_err(|_| src.err(format!("bad face index '{t}'")))?;
                    if i < 1 {
                        return Err(src.err("negative/zero OBJ indices are not supported"));
                    }
                    poly.push((i - 1) as usize);
                }
                if poly.len() < 3 {
                    return Err(src.err("face with fewer than 3 vertices"));
                }
                fan_triangulate(&poly, &mut faces);
            }
            _ => {} // ignore normals, texcoords, groups, materials
        }
    }
    Ok((vertices, faces))
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum PlyProp {
    Scalar,
    List,
}

fn parse_ply<R: BufRead>(reader: R, path: &Path) -> Result<Geometry, MeshError> {
    let mut src = LineSource::new(reader, path);
    let magic = src
        .next_content_line(false)?
        .ok_or_else(|| src.err("empty file"))?;
    if magic.trim() != "ply" {
        return Err(src.err("missing 'ply' magic"));
    }

    // header
    let mut elements: Vec<(String, usize, Vec<(PlyProp, String)>)> = Vec::new();
    loop {
        let line = src
            .next_content_line(false)?
            .ok_or_else(|| src.err("unexpected end of header"))?;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["format", kind, _] => {
                if *kind != "ascii" {
                    return Err(src.err("only ascii PLY is supported"));
                }
            }
            ["comment", ..] | ["obj_info", ..] => {}
            ["element", name, count] => {
                let count: usize = count
                    .parse()
                    .map_err(|_| src.err(format!("bad element count '{count}'")))?;
                elements.push((name.to_string(), count, Vec::new()));
            }
            ["property", "list", _, _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| src.err("property before any element"))?;
                el.2.push((PlyProp::List, name.to_string()));
            }
            ["property", _, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| src.err("property before any element"))?;
                el.2.push((PlyProp::Scalar, name.to_string()));
            }
            ["end_header"] => break,
            _ => return Err(src.err(format!("unrecognized header line '{line}'"))),
        }
    }

    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (name, count, props) in &elements {
        if name == "vertex" {
            let pos = |want: &str| props.iter().position(|(_, n)| n == want);
            let (xi, yi, zi) = match (pos("x"), pos("y"), pos("z")) {
                (Some(a), Some(b), Some(c)) => (a, b, c),
                _ => return Err(src.err("vertex element lacks x/y/z properties")),
            };
            if props.iter().any(|(k, _)| *k == PlyProp::List) {
                return Err(src.err("list properties on vertices are not supported"));
            }
            for _ in 0..*count {
                let line = src
                    .next_content_line(false)?
                    .ok_or_else(|| src.err("unexpected end of vertex data"))?;
                let vals: Vec<f64> = line
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| src.err(format!("bad number '{t}'"))))
                    .collect::<Result<_, _>>()?;
                if vals.len() < props.len() {
                    return Err(src.err("short vertex line"));
                }
                vertices.push([vals[xi], vals[yi], vals[zi]]);
            }
        } else if name == "face" {
            for _ in 0..*count {
                let line = src
                    .next_content_line(false)?
                    .ok_or_else(|| src.err("unexpected end of face data"))?;
                let idx: Vec<usize> = line
                    .split_whitespace()
                    .map(|t| t.parse().map_err(|_| src.err(format!("bad index '{t}'"))))
                    .collect::<Result<_, _>>()?;
                if idx.is_empty() || idx.len() < idx[0] + 1 || idx[0] < 3 {
                    return Err(src.err("face line must be 'k i0 ... ik-1' with k >= 3"));
                }
                fan_triangulate(&idx[1..idx[0] + 1], &mut faces);
            }
        } else {
            // skip one line per entry of unknown elements
            for _ in 0..*count {
                src.next_content_line(false)?
                    .ok_or_else(|| src.err("unexpected end of file"))?;
            }
        }
    }
    Ok((vertices, faces))
}

fn parse_point(line: &str) -> Option<[f64; 3]> {
    let mut it = line.split_whitespace();
    let x = it.next()?.parse().ok()?;
    let y = it.next()?.parse().ok()?;
    let z = it.next()?.parse().ok()?;
    Some([x, y, z])
}

/// Writes the mesh as ASCII PLY with a per-vertex `quality` channel and an
/// optional flag coloring. Coordinates and quality are printed as shortest
/// round-trip `f32` decimals (the PLY `float` type).
pub fn save_diagnosis_mesh(
    mesh: &TriangleMesh,
    scalar: &[f64],
    flags: Option<&VertexMask>,
    path: &Path,
) -> Result<(), MeshError> {
    if scalar.len() != mesh.vertex_count() {
        return Err(MeshError::DimensionMismatch {
            expected: mesh.vertex_count(),
            actual: scalar.len(),
        });
    }
    if let Some(f) = flags {
        if f.len() != mesh.vertex_count() {
            return Err(MeshError::DimensionMismatch {
                expected: mesh.vertex_count(),
                actual: f.len(),
            });
        }
    }

    let file = File::create(path).map_err(MeshError::Io)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "ply")?;
    writeln!(w, "format ascii 1.0")?;
    writeln!(w, "element vertex {}", mesh.vertex_count())?;
    writeln!(w, "property float x")?;
    writeln!(w, "property float y")?;
    writeln!(w, "property float z")?;
    writeln!(w, "property float quality")?;
    if flags.is_some() {
        writeln!(w, "property uchar red")?;
        writeln!(w, "property uchar green")?;
        writeln!(w, "property uchar blue")?;
    }
    writeln!(w, "element face {}", mesh.face_count())?;
    writeln!(w, "property list uchar int vertex_indices")?;
    writeln!(w, "end_header")?;
    for (i, v) in mesh.vertices().iter().enumerate() {
        write!(
            w,
            "{} {} {} {}",
            v[0] as f32, v[1] as f32, v[2] as f32, scalar[i] as f32
        )?;
        if let Some(f) = flags {
            let rgb = if f.get(i) { FLAGGED_RGB } else { UNFLAGGED_RGB };
            write!(w, " {} {} {}", rgb[0], rgb[1], rgb[2])?;
        }
        writeln!(w)?;
    }
    for f in mesh.faces() {
        writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TETRA_OFF: &str = "OFF\n4 4 6\n1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n";

    const CUBE_OFF: &str = "OFF\n8 12 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n0 0 1\n1 0 1\n1 1 1\n0 1 1\n\
3 0 2 1\n3 0 3 2\n3 4 5 6\n3 4 6 7\n3 0 1 5\n3 0 5 4\n3 1 2 6\n3 1 6 5\n3 2 3 7\n3 2 7 6\n3 3 0 4\n3 3 4 7\n";

    fn write_temp(content: &str, ext: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(ext).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_tetrahedron_off() {
        let f = write_temp(TETRA_OFF, ".off");
        let mesh = load_mesh(f.path(), MeshFormat::Off).unwrap();
        assert_eq!(mesh.vertex_count(), 4);
        assert_eq!(mesh.face_count(), 4);
        assert_eq!(mesh.vertices()[0], [1.0, 1.0, 1.0]);
    }

    #[test]
    fn loads_triangulated_cube_off() {
        let f = write_temp(CUBE_OFF, ".off");
        let mesh = load_mesh(f.path(), MeshFormat::Off).unwrap();
        assert_eq!(mesh.vertex_count(), 8);
        assert_eq!(mesh.face_count(), 12);
    }

    #[test]
    fn off_with_out_of_range_index_names_face() {
        let mut content = String::from("OFF\n10 1 0\n");
        for i in 0..10 {
            content.push_str(&format!("{i} 0 0.5\n"));
        }
        content.push_str("3 0 1 99\n");
        let f = write_temp(&content, ".off");
        let err = load_mesh(f.path(), MeshFormat::Off).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("face 0") && msg.contains("99"), "{msg}");
    }

    #[test]
    fn loads_obj_with_slashed_indices() {
        let content = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3\n";
        let f = write_temp(content, ".obj");
        let mesh = load_mesh(f.path(), MeshFormat::Obj).unwrap();
        assert_eq!(mesh.vertex_count(), 3);
        assert_eq!(mesh.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn loads_ply_ignoring_extra_vertex_properties() {
        let content = "ply\nformat ascii 1.0\ncomment test\nelement vertex 3\n\
property float x\nproperty float y\nproperty float z\nproperty float quality\n\
element face 1\nproperty list uchar int vertex_indices\nend_header\n\
0 0 0 7\n1 0 0 8\n0 1 0 9\n3 0 1 2\n";
        let f = write_temp(content, ".ply");
        let mesh = load_mesh(f.path(), MeshFormat::PlyAscii).unwrap();
        assert_eq!(mesh.vertex_count(), 3);
        assert_eq!(mesh.faces(), &[[0, 1, 2]]);
    }

    #[test]
    fn save_zero_scalar_writes_quality_zero() {
        let mesh = crate::mesh::tests::tetrahedron();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.ply");
        save_diagnosis_mesh(&mesh, &[0.0; 4], None, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().filter(|l| l.ends_with(" 0")).count(), 4);
        assert!(text.contains("property float quality"));
    }

    #[test]
    fn save_monotone_quality_round_trips() {
        let mesh = crate::mesh::tests::tetrahedron();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.ply");
        let scalar: Vec<f64> = (0..4).map(|i| i as f64).collect();
        save_diagnosis_mesh(&mesh, &scalar, None, &path).unwrap();

        // quality column is monotone in vertex order
        let text = std::fs::read_to_string(&path).unwrap();
        let qualities: Vec<f64> = text
            .lines()
            .skip_while(|l| *l != "end_header")
            .skip(1)
            .take(4)
            .map(|l| l.split_whitespace().nth(3).unwrap().parse().unwrap())
            .collect();
        assert_eq!(qualities, vec![0.0, 1.0, 2.0, 3.0]);

        // geometry survives a round trip
        let loaded = load_mesh(&path, MeshFormat::PlyAscii).unwrap();
        assert_eq!(loaded.faces(), mesh.faces());
        for (a, b) in loaded.vertices().iter().zip(mesh.vertices()) {
            for k in 0..3 {
                assert!((a[k] - b[k]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn save_all_flags_colors_every_vertex() {
        let mesh = crate::mesh::tests::tetrahedron();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.ply");
        save_diagnosis_mesh(&mesh, &[0.0; 4], Some(&VertexMask::all_true(4)), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let colored = text
            .lines()
            .skip_while(|l| *l != "end_header")
            .skip(1)
            .take(4)
            .filter(|l| l.ends_with("255 255 0"))
            .count();
        assert_eq!(colored, 4);
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(
            MeshFormat::from_path(Path::new("a/b/mesh.OFF")),
            Some(MeshFormat::Off)
        );
        assert_eq!(
            MeshFormat::from_path(Path::new("mesh.ply")),
            Some(MeshFormat::PlyAscii)
        );
        assert_eq!(MeshFormat::from_path(Path::new("mesh.stl")), None);
    }
}
