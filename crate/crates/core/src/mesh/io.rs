//! OBJ and PLY readers/writers. Colors are per-vertex RGB in `[0, 1]`.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::Vec3;

use super::TriangleMesh;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshFormat {
    Obj,
    Ply,
}

impl MeshFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()) {
            Some(e) if e == "obj" => Ok(MeshFormat::Obj),
            Some(e) if e == "ply" => Ok(MeshFormat::Ply),
            _ => Err(Error::InvalidArgument(format!(
                "cannot infer mesh format from '{}' (expected .obj or .ply)",
                path.display()
            ))),
        }
    }
}

/// Loads a mesh, inferring the format from the extension. Material positions
/// are initialized to the loaded vertices.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let format = MeshFormat::from_path(path)?;
    load_mesh_as(path, format)
}

pub fn load_mesh_as(path: &Path, format: MeshFormat) -> Result<TriangleMesh> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mesh = match format {
        MeshFormat::Obj => {
            let text = String::from_utf8_lossy(&bytes);
            parse_obj(&text)?
        }
        MeshFormat::Ply => parse_ply(&bytes)?,
    };
    Ok(mesh.with_material_from_vertices())
}

pub fn save_mesh(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = match MeshFormat::from_path(path)? {
        MeshFormat::Obj => write_obj(mesh),
        MeshFormat::Ply => write_ply_ascii(mesh, &[]),
    };
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn fan_triangulate(poly: &[u32], line: usize, faces: &mut Vec<[u32; 3]>) -> Result<()> {
    if poly.len() < 3 {
        return Err(parse_err(line, format!("polygon with {} vertices", poly.len())));
    }
    for i in 1..poly.len() - 1 {
        faces.push([poly[0], poly[i], poly[i + 1]]);
    }
    Ok(())
}

/// Parses Wavefront OBJ `v` and `f` records; `vn`/`vt` and other records are
/// ignored. `v x y z r g b` lines carry vertex colors.
pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut colors: Vec<[f64; 3]> = Vec::new();
    let mut faces = Vec::new();
    let mut face_lines = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let l = raw.split('#').next().unwrap_or("").trim();
        let mut tok = l.split_whitespace();
        match tok.next() {
            Some("v") => {
                let vals: Vec<f64> = tok
                    .map(|t| t.parse::<f64>().map_err(|e| parse_err(line, format!("bad number '{t}': {e}"))))
                    .collect::<Result<_>>()?;
                if vals.len() < 3 {
                    return Err(parse_err(line, "vertex needs three coordinates"));
                }
                vertices.push(Vec3::new(vals[0], vals[1], vals[2]));
                if vals.len() >= 6 {
                    colors.push([vals[3], vals[4], vals[5]]);
                }
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tok {
                    let idx_str = t.split('/').next().unwrap_or("");
                    let idx: i64 = idx_str
                        .parse()
                        .map_err(|e| parse_err(line, format!("bad face index '{t}': {e}")))?;
                    let n = vertices.len() as i64;
                    let resolved = if idx > 0 { idx - 1 } else { n + idx };
                    if idx == 0 || resolved < 0 {
                        return Err(parse_err(line, format!("invalid face index {idx}")));
                    }
                    poly.push(resolved as u32);
                }
                let before = faces.len();
                fan_triangulate(&poly, line, &mut faces)?;
                face_lines.extend(std::iter::repeat(line).take(faces.len() - before));
            }
            _ => {}
        }
    }
    let n = vertices.len();
    for (f, &line) in faces.iter().zip(&face_lines) {
        if let Some(&bad) = f.iter().find(|&&v| v as usize >= n) {
            return Err(parse_err(
                line,
                format!("face references vertex {} but the file has {n} vertices", bad + 1),
            ));
        }
    }
    let mesh = TriangleMesh::new(vertices, faces)?;
    if !colors.is_empty() && colors.len() == mesh.vertex_count() {
        mesh.with_colors(colors)
    } else {
        Ok(mesh)
    }
}

pub fn write_obj(mesh: &TriangleMesh) -> String {
    let mut s = String::new();
    for (i, v) in mesh.vertices.iter().enumerate() {
        match &mesh.colors {
            Some(c) => writeln!(s, "v {} {} {} {} {} {}", v.x, v.y, v.z, c[i][0], c[i][1], c[i][2]).unwrap(),
            None => writeln!(s, "v {} {} {}", v.x, v.y, v.z).unwrap(),
        }
    }
    for f in &mesh.faces {
        writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).unwrap();
    }
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str, line: usize) -> Result<Self> {
        Ok(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(parse_err(line, format!("unknown PLY type '{other}'"))),
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

/// Parses ASCII or binary little-endian PLY with `vertex` (x, y, z, optional
/// red/green/blue) and `face` (vertex_indices list) elements.
pub fn parse_ply(bytes: &[u8]) -> Result<TriangleMesh> {
    let mut pos = 0usize;
    let mut line_no = 0usize;
    let next_line = |pos: &mut usize| -> Option<String> {
        if *pos >= bytes.len() {
            return None;
        }
        let end = bytes[*pos..].iter().position(|&b| b == b'\n').map_or(bytes.len(), |e| *pos + e);
        let l = String::from_utf8_lossy(&bytes[*pos..end]).trim_end_matches('\r').to_string();
        *pos = (end + 1).min(bytes.len());
        Some(l)
    };
    if next_line(&mut pos).as_deref() != Some("ply") {
        return Err(parse_err(1, "missing 'ply' magic"));
    }
    line_no += 1;
    let mut binary = false;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        let l = next_line(&mut pos).ok_or_else(|| parse_err(line_no, "unterminated header"))?;
        line_no += 1;
        let t: Vec<&str> = l.split_whitespace().collect();
        match t.first().copied() {
            Some("format") => match t.get(1).copied() {
                Some("ascii") => binary = false,
                Some("binary_little_endian") => binary = true,
                other => return Err(parse_err(line_no, format!("unsupported PLY format {other:?}"))),
            },
            Some("element") => {
                if t.len() != 3 {
                    return Err(parse_err(line_no, "malformed element line"));
                }
                let count = t[2].parse().map_err(|_| parse_err(line_no, "bad element count"))?;
                elements.push(Element {
                    name: t[1].to_string(),
                    count,
                    props: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(line_no, "property before element"))?;
                if t.get(1) == Some(&"list") {
                    if t.len() != 5 {
                        return Err(parse_err(line_no, "malformed list property"));
                    }
                    el.props.push(Property::List(
                        t[4].to_string(),
                        Scalar::parse(t[2], line_no)?,
                        Scalar::parse(t[3], line_no)?,
                    ));
                } else {
                    if t.len() != 3 {
                        return Err(parse_err(line_no, "malformed property"));
                    }
                    el.props.push(Property::Scalar(t[2].to_string(), Scalar::parse(t[1], line_no)?));
                }
            }
            Some("end_header") => break,
            _ => {}
        }
    }

    let mut vertices = Vec::new();
    let mut colors = Vec::new();
    let mut color_is_byte = true;
    let mut faces = Vec::new();
    let body = &bytes[pos..];
    let mut ascii_lines = std::str::from_utf8(body)
        .ok()
        .filter(|_| !binary)
        .map(|s| s.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()));
    if !binary && ascii_lines.is_none() {
        return Err(parse_err(line_no, "ASCII PLY body is not valid UTF-8"));
    }
    let mut cursor = 0usize;

    for el in &elements {
        for _ in 0..el.count {
            // Read one record into (scalar values, list values) by property.
            let mut scalars: Vec<(String, f64, Scalar)> = Vec::new();
            let mut lists: Vec<(String, Vec<f64>)> = Vec::new();
            if binary {
                for p in &el.props {
                    match p {
                        Property::Scalar(name, ty) => {
                            let sz = ty.size();
                            if cursor + sz > body.len() {
                                return Err(parse_err(line_no, "truncated binary PLY body"));
                            }
                            scalars.push((name.clone(), ty.read_le(&body[cursor..]), *ty));
                            cursor += sz;
                        }
                        Property::List(name, cty, ity) => {
                            if cursor + cty.size() > body.len() {
                                return Err(parse_err(line_no, "truncated binary PLY body"));
                            }
                            let n = cty.read_le(&body[cursor..]) as usize;
                            cursor += cty.size();
                            if cursor + n * ity.size() > body.len() {
                                return Err(parse_err(line_no, "truncated binary PLY body"));
                            }
                            let vals = (0..n).map(|k| ity.read_le(&body[cursor + k * ity.size()..])).collect();
                            cursor += n * ity.size();
                            lists.push((name.clone(), vals));
                        }
                    }
                }
            } else {
                let (li, l) = ascii_lines
                    .as_mut()
                    .unwrap()
                    .next()
                    .ok_or_else(|| parse_err(line_no, format!("missing '{}' records", el.name)))?;
                let rec_line = line_no + li + 1;
                let mut tok = l.split_whitespace();
                let mut num = |what: &str| -> Result<f64> {
                    tok.next()
                        .ok_or_else(|| parse_err(rec_line, format!("missing {what}")))?
                        .parse::<f64>()
                        .map_err(|e| parse_err(rec_line, format!("bad {what}: {e}")))
                };
                for p in &el.props {
                    match p {
                        Property::Scalar(name, ty) => scalars.push((name.clone(), num(name)?, *ty)),
                        Property::List(name, _, _) => {
                            let n = num("list length")? as usize;
                            let vals = (0..n).map(|_| num(name)).collect::<Result<Vec<_>>>()?;
                            lists.push((name.clone(), vals));
                        }
                    }
                }
            }

            match el.name.as_str() {
                "vertex" => {
                    let get = |k: &str| scalars.iter().find(|(n, _, _)| n == k).map(|(_, v, t)| (*v, *t));
                    let (x, y, z) = match (get("x"), get("y"), get("z")) {
                        (Some(x), Some(y), Some(z)) => (x.0, y.0, z.0),
                        _ => return Err(parse_err(line_no, "vertex element lacks x/y/z")),
                    };
                    vertices.push(Vec3::new(x, y, z));
                    if let (Some(r), Some(g), Some(b)) = (get("red"), get("green"), get("blue")) {
                        color_is_byte = matches!(r.1, Scalar::U8 | Scalar::I8);
                        colors.push([r.0, g.0, b.0]);
                    }
                }
                "face" => {
                    let idx = lists
                        .iter()
                        .find(|(n, _)| n == "vertex_indices" || n == "vertex_index")
                        .ok_or_else(|| parse_err(line_no, "face element lacks vertex_indices"))?;
                    let poly: Vec<u32> = idx.1.iter().map(|&v| v as u32).collect();
                    fan_triangulate(&poly, line_no, &mut faces)?;
                }
                _ => {}
            }
        }
    }

    let n = vertices.len();
    if let Some(f) = faces.iter().find(|f| f.iter().any(|&v| v as usize >= n)) {
        return Err(Error::InvalidMesh(format!("PLY face {f:?} out of range for {n} vertices")));
    }
    let mesh = TriangleMesh::new(vertices, faces)?;
    if colors.len() == mesh.vertex_count() && !colors.is_empty() {
        let scale = if color_is_byte { 1.0 / 255.0 } else { 1.0 };
        let c = colors
            .into_iter()
            .map(|c| [c[0] * scale, c[1] * scale, c[2] * scale])
            .collect();
        mesh.with_colors(c)
    } else {
        Ok(mesh)
    }
}

fn to_byte(c: f64) -> u8 {
    (c.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// ASCII PLY. `comments` are emitted as `comment` header lines.
pub fn write_ply_ascii(mesh: &TriangleMesh, comments: &[String]) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    for c in comments {
        for l in c.lines() {
            writeln!(s, "comment {l}").unwrap();
        }
    }
    writeln!(s, "element vertex {}", mesh.vertices.len()).unwrap();
    s.push_str("property double x\nproperty double y\nproperty double z\n");
    if mesh.colors.is_some() {
        s.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    writeln!(s, "element face {}", mesh.faces.len()).unwrap();
    s.push_str("property list uchar int vertex_indices\nend_header\n");
    for (i, v) in mesh.vertices.iter().enumerate() {
        match &mesh.colors {
            Some(c) => writeln!(
                s,
                "{} {} {} {} {} {}",
                v.x,
                v.y,
                v.z,
                to_byte(c[i][0]),
                to_byte(c[i][1]),
                to_byte(c[i][2])
            )
            .unwrap(),
            None => writeln!(s, "{} {} {}", v.x, v.y, v.z).unwrap(),
        }
    }
    for f in &mesh.faces {
        writeln!(s, "3 {} {} {}", f[0], f[1], f[2]).unwrap();
    }
    s
}
