use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{MeshError, Result, TriangleMesh, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Stl,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "obj" => Ok(MeshFormat::Obj),
            "stl" => Ok(MeshFormat::Stl),
            "ply" => Ok(MeshFormat::Ply),
            _ => Err(MeshError::UnknownFormat(path.display().to_string())),
        }
    }
}

/// What happened while turning a file into a [`TriangleMesh`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct LoadReport {
    pub input_triangles: usize,
    pub dropped_degenerate: usize,
    pub welded_vertices: usize,
}

/// Loads an OBJ, STL (ASCII or binary) or ASCII PLY file.
///
/// The format is inferred from the extension when `format` is `None`.
pub fn load_mesh(path: impl AsRef<Path>, format: Option<MeshFormat>) -> Result<(TriangleMesh, LoadReport)> {
    let path = path.as_ref();
    let format = match format {
        Some(f) => f,
        None => MeshFormat::from_path(path)?,
    };
    let bytes = fs::read(path).map_err(|source| MeshError::UnreadableFile {
        path: path.to_path_buf(),
        source,
    })?;
    let soup = match format {
        MeshFormat::Obj => parse_obj(&text(&bytes)?)?,
        MeshFormat::Stl => parse_stl(&bytes)?,
        MeshFormat::Ply => parse_ply(&text(&bytes)?)?,
    };
    if soup.is_empty() {
        return Err(MeshError::EmptyMesh);
    }
    TriangleMesh::from_soup(&soup)
}

fn text(bytes: &[u8]) -> Result<String> {
    String::from_utf8(bytes.to_vec()).map_err(|e| MeshError::Parse {
        location: format!("byte {}", e.utf8_error().valid_up_to()),
        message: "file is not valid UTF-8".into(),
    })
}

fn parse_err(line: usize, message: impl Into<String>) -> MeshError {
    MeshError::Parse {
        location: format!("line {line}"),
        message: message.into(),
    }
}

fn parse_f64(token: Option<&str>, line: usize) -> Result<f64> {
    let t = token.ok_or_else(|| parse_err(line, "missing coordinate"))?;
    t.parse::<f64>()
        .map_err(|_| parse_err(line, format!("invalid number `{t}`")))
}

fn parse_vec3<'a>(tokens: &mut impl Iterator<Item = &'a str>, line: usize) -> Result<Vec3> {
    Ok(Vec3::new(
        parse_f64(tokens.next(), line)?,
        parse_f64(tokens.next(), line)?,
        parse_f64(tokens.next(), line)?,
    ))
}

/// `v` and `f` records only; polygons are fan-triangulated.
pub(crate) fn parse_obj(src: &str) -> Result<Vec<[Vec3; 3]>> {
    let mut vertices = Vec::new();
    let mut soup = Vec::new();
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => vertices.push(parse_vec3(&mut tokens, line)?),
            Some("f") => {
                let mut idx = Vec::new();
                for t in tokens {
                    let first = t.split('/').next().unwrap_or("");
                    let k: i64 = first
                        .parse()
                        .map_err(|_| parse_err(line, format!("invalid face index `{t}`")))?;
                    let resolved = if k > 0 {
                        k - 1
                    } else if k < 0 {
                        vertices.len() as i64 + k
                    } else {
                        return Err(parse_err(line, "face index 0 is not valid in OBJ"));
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(parse_err(line, format!("face index {k} out of range")));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(parse_err(line, "face with fewer than 3 vertices"));
                }
                for w in 1..idx.len() - 1 {
                    soup.push([vertices[idx[0]], vertices[idx[w]], vertices[idx[w + 1]]]);
                }
            }
            _ => {}
        }
    }
    Ok(soup)
}

pub(crate) fn parse_stl(bytes: &[u8]) -> Result<Vec<[Vec3; 3]>> {
    if bytes.len() >= 84 {
        let count = u32::from_le_bytes([bytes[80], bytes[81], bytes[82], bytes[83]]) as usize;
        if bytes.len() == 84 + 50 * count {
            return Ok(parse_binary_stl(bytes, count));
        }
    }
    if bytes.starts_with(b"solid") {
        return parse_ascii_stl(&text(bytes)?);
    }
    Err(MeshError::Parse {
        location: "byte 0".into(),
        message: "neither ASCII STL nor a binary STL of consistent length".into(),
    })
}

fn parse_binary_stl(bytes: &[u8], count: usize) -> Vec<[Vec3; 3]> {
    let f = |o: usize| f32::from_le_bytes([bytes[o], bytes[o + 1], bytes[o + 2], bytes[o + 3]]) as f64;
    (0..count)
        .map(|i| {
            // 12 bytes of facet normal precede the vertices.
            let base = 84 + 50 * i + 12;
            let v = |k: usize| {
                let o = base + 12 * k;
                Vec3::new(f(o), f(o + 4), f(o + 8))
            };
            [v(0), v(1), v(2)]
        })
        .collect()
}

fn parse_ascii_stl(src: &str) -> Result<Vec<[Vec3; 3]>> {
    let mut soup = Vec::new();
    let mut pending = Vec::with_capacity(3);
    for (i, raw) in src.lines().enumerate() {
        let line = i + 1;
        let mut tokens = raw.split_whitespace();
        match tokens.next() {
            Some("vertex") => {
                pending.push(parse_vec3(&mut tokens, line)?);
                if pending.len() > 3 {
                    return Err(parse_err(line, "facet with more than 3 vertices"));
                }
            }
            Some("endloop") => {
                if pending.len() != 3 {
                    return Err(parse_err(line, "facet without exactly 3 vertices"));
                }
                soup.push([pending[0], pending[1], pending[2]]);
                pending.clear();
            }
            _ => {}
        }
    }
    Ok(soup)
}

pub(crate) fn parse_ply(src: &str) -> Result<Vec<[Vec3; 3]>> {
    struct Element {
        name: String,
        count: usize,
        props: Vec<String>,
    }
    let mut lines = src.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(parse_err(1, "missing `ply` magic")),
    }
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let (i, raw) = lines.next().ok_or_else(|| parse_err(0, "unterminated header"))?;
        let line = i + 1;
        let mut tokens = raw.split_whitespace();
        match tokens.next() {
            Some("format") => {
                if tokens.next() != Some("ascii") {
                    return Err(parse_err(line, "only ASCII PLY is supported"));
                }
            }
            Some("element") => {
                let name = tokens.next().ok_or_else(|| parse_err(line, "element without name"))?;
                let count = tokens
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(line, "element without count"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line, "property before element"))?;
                let rest: Vec<&str> = tokens.collect();
                let name = rest.last().ok_or_else(|| parse_err(line, "property without name"))?;
                el.props.push(name.to_string());
            }
            Some("end_header") => break,
            _ => {}
        }
    }

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut soup = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let (i, raw) = lines.next().ok_or_else(|| parse_err(0, format!("truncated `{}` data", el.name)))?;
            let line = i + 1;
            let tokens: Vec<&str> = raw.split_whitespace().collect();
            match el.name.as_str() {
                "vertex" => {
                    let pos = |axis: &str| -> Result<f64> {
                        let k = el
                            .props
                            .iter()
                            .position(|p| p == axis)
                            .ok_or_else(|| parse_err(line, format!("vertex has no `{axis}` property")))?;
                        parse_f64(tokens.get(k).copied(), line)
                    };
                    vertices.push(Vec3::new(pos("x")?, pos("y")?, pos("z")?));
                }
                "face" => {
                    let n: usize = tokens
                        .first()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(line, "face without vertex count"))?;
                    if n < 3 || tokens.len() < n + 1 {
                        return Err(parse_err(line, "malformed face"));
                    }
                    let mut idx = Vec::with_capacity(n);
                    for t in &tokens[1..=n] {
                        let k: usize = t
                            .parse()
                            .map_err(|_| parse_err(line, format!("invalid face index `{t}`")))?;
                        if k >= vertices.len() {
                            return Err(parse_err(line, format!("face index {k} out of range")));
                        }
                        idx.push(k);
                    }
                    for w in 1..n - 1 {
                        soup.push([vertices[idx[0]], vertices[idx[w]], vertices[idx[w + 1]]]);
                    }
                }
                _ => {}
            }
        }
    }
    Ok(soup)
}

/// Writes the mesh as a plain OBJ file.
pub fn write_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut s = String::new();
    for v in mesh.vertices() {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    fs::write(path, s)?;
    Ok(())
}

/// An ASCII PLY document: colored vertices, colored faces carrying one integer
/// attribute (cluster id, cover count, ...) and colored edges.
#[derive(Debug, Clone, Default)]
pub struct PlyScene {
    pub vertices: Vec<(Vec3, [u8; 3])>,
    pub faces: Vec<([usize; 3], [u8; 3], i64)>,
    pub edges: Vec<([usize; 2], [u8; 3])>,
    /// Name of the integer face property.
    pub face_attribute: String,
}

impl PlyScene {
    /// Starts a scene from `mesh` with every vertex gray and every face
    /// colored by `face_style(t) -> (color, attribute)`.
    pub fn from_mesh(
        mesh: &TriangleMesh,
        face_attribute: &str,
        face_style: impl Fn(usize) -> ([u8; 3], i64),
    ) -> PlyScene {
        PlyScene {
            vertices: mesh.vertices().iter().map(|v| (*v, [180, 180, 180])).collect(),
            faces: (0..mesh.len())
                .map(|t| {
                    let (color, value) = face_style(t);
                    (mesh.triangles()[t], color, value)
                })
                .collect(),
            edges: Vec::new(),
            face_attribute: face_attribute.to_string(),
        }
    }

    pub fn to_ply_string(&self) -> String {
        let mut s = String::new();
        let attr = if self.face_attribute.is_empty() {
            "value"
        } else {
            &self.face_attribute
        };
        s.push_str("ply\nformat ascii 1.0\n");
        let _ = writeln!(s, "element vertex {}", self.vertices.len());
        s.push_str("property double x\nproperty double y\nproperty double z\n");
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
        let _ = writeln!(s, "element face {}", self.faces.len());
        s.push_str("property list uchar int vertex_indices\n");
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
        let _ = writeln!(s, "property int {attr}");
        let _ = writeln!(s, "element edge {}", self.edges.len());
        s.push_str("property int vertex1\nproperty int vertex2\n");
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
        s.push_str("end_header\n");
        for (p, c) in &self.vertices {
            let _ = writeln!(s, "{} {} {} {} {} {}", p.x, p.y, p.z, c[0], c[1], c[2]);
        }
        for (t, c, v) in &self.faces {
            let _ = writeln!(s, "3 {} {} {} {} {} {} {}", t[0], t[1], t[2], c[0], c[1], c[2], v);
        }
        for (e, c) in &self.edges {
            let _ = writeln!(s, "{} {} {} {} {}", e[0], e[1], c[0], c[1], c[2]);
        }
        s
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_ply_string())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const CUBE_OBJ: &str = "\
# unit cube
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3
f 1 3 2
f 5 6 7
f 5 7 8
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
";

    fn write_tmp(name: &str, bytes: &[u8]) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join(name);
        fs::write(&p, bytes).unwrap();
        (dir, p)
    }

    #[test]
    fn obj_cube() {
        let (_d, p) = write_tmp("cube.obj", CUBE_OBJ.as_bytes());
        let (m, r) = load_mesh(&p, None).unwrap();
        assert_eq!(m.len(), 12);
        assert_relative_eq!(m.total_area(), 6.0, epsilon = 1e-12);
        assert_eq!(r.dropped_degenerate, 0);
        // Outward winding.
        let center = Vec3::repeat(0.5);
        for t in 0..m.len() {
            assert!(m.normal(t).dot(&(m.centroid(t) - center)) > 0.0);
        }
    }

    #[test]
    fn obj_with_degenerate_face() {
        let src = format!("{CUBE_OBJ}f 1 2 1\nv 2 0 0\nf 1 2 -1\n");
        let (_d, p) = write_tmp("cube.obj", src.as_bytes());
        let (m, r) = load_mesh(&p, None).unwrap();
        assert_eq!(m.len(), 12);
        assert_eq!(r.dropped_degenerate, 2);
    }

    #[test]
    fn obj_quads_are_fanned() {
        let src = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3/3/3 4/4/4\n";
        let soup = parse_obj(src).unwrap();
        assert_eq!(soup.len(), 2);
    }

    #[test]
    fn obj_errors_carry_line() {
        let err = parse_obj("v 0 0 0\nv 1 x 0\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { ref location, .. } if location == "line 2"), "{err}");
        let err = parse_obj("v 0 0 0\nf 1 2 3\n").unwrap_err();
        assert!(matches!(err, MeshError::Parse { .. }));
    }

    #[test]
    fn stl_ascii_single_triangle() {
        let src = "solid t\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nvertex 0 1 0\nendloop\nendfacet\nendsolid t\n";
        let (_d, p) = write_tmp("t.stl", src.as_bytes());
        let (m, _) = load_mesh(&p, None).unwrap();
        assert_eq!(m.len(), 1);
        assert_relative_eq!(m.centroid(0), Vec3::new(1.0 / 3.0, 1.0 / 3.0, 0.0), epsilon = 1e-12);
        assert_relative_eq!(m.normal(0), Vec3::z(), epsilon = 1e-12);
        assert_relative_eq!(m.area(0), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn stl_binary_single_triangle() {
        let mut bytes = vec![0u8; 80];
        bytes.extend_from_slice(&1u32.to_le_bytes());
        for v in [0.0f32, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        bytes.extend_from_slice(&[0, 0]);
        let (_d, p) = write_tmp("t.stl", &bytes);
        let (m, _) = load_mesh(&p, Some(MeshFormat::Stl)).unwrap();
        assert_eq!(m.len(), 1);
        assert_relative_eq!(m.area(0), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn ply_round_trip_through_scene() {
        let soup = parse_obj(CUBE_OBJ).unwrap();
        let (m, _) = TriangleMesh::from_soup(&soup).unwrap();
        let scene = PlyScene::from_mesh(&m, "cluster", |t| ([0, 0, 0], t as i64));
        let (_d, p) = write_tmp("c.ply", scene.to_ply_string().as_bytes());
        let (back, _) = load_mesh(&p, None).unwrap();
        assert_eq!(back.len(), 12);
        assert_relative_eq!(back.total_area(), 6.0, epsilon = 1e-12);
    }

    #[test]
    fn unreadable_and_unknown() {
        assert!(matches!(
            load_mesh("/nonexistent/x.obj", None),
            Err(MeshError::UnreadableFile { .. })
        ));
        assert!(matches!(load_mesh("x.xyz", None), Err(MeshError::UnknownFormat(_))));
        let (_d, p) = write_tmp("e.obj", b"v 0 0 0\n");
        assert!(matches!(load_mesh(&p, None), Err(MeshError::EmptyMesh)));
    }
}
