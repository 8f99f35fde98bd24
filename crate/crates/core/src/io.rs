//! Mesh and point-cloud file formats.
//!
//! * Wavefront OBJ: `v` and `f` records, 1-based (or negative relative)
//!   indices, `v/vt/vn` references accepted. Polygons are fan-triangulated.
//! * PLY: `binary_little_endian` and `ascii`. Vertices need `x y z`; faces
//!   are read from a `vertex_indices` (or `vertex_index`) list property and
//!   fan-triangulated. Optional `red green blue` vertex colors are kept.
//! * Plain text clouds: one `x y z` triple per line, `#` comments allowed.

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::geom::mesh::{PointCloud, TriangleMesh};

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn fan(poly: &[usize], faces: &mut Vec<[usize; 3]>) {
    for i in 1..poly.len().saturating_sub(1) {
        faces.push([poly[0], poly[i], poly[i + 1]]);
    }
}

pub fn read_obj<R: BufRead>(reader: R) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let xyz: Vec<f64> = tokens.take(3).map(|t| t.parse::<f64>().map_err(|e| parse_err(ln + 1, e))).collect::<Result<_>>()?;
                if xyz.len() != 3 {
                    return Err(parse_err(ln + 1, "vertex needs three coordinates"));
                }
                vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
            }
            Some("f") => {
                let poly: Vec<usize> = tokens
                    .map(|t| {
                        let head = t.split('/').next().unwrap_or("");
                        let idx: i64 = head.parse().map_err(|e| parse_err(ln + 1, e))?;
                        let n = vertices.len() as i64;
                        let resolved = if idx > 0 { idx - 1 } else { n + idx };
                        if idx == 0 || resolved < 0 || resolved >= n {
                            return Err(parse_err(ln + 1, format!("face index {idx} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_>>()?;
                if poly.len() < 3 {
                    return Err(parse_err(ln + 1, "face needs at least three vertices"));
                }
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, faces)
}

pub fn write_obj<W: Write>(mesh: &TriangleMesh, mut w: W) -> Result<()> {
    for v in mesh.vertices() {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z)?;
    }
    for f in mesh.faces() {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
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
            Scalar::I32 => i32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::U32 => u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F32 => f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

#[derive(Debug, PartialEq)]
enum PlyFormat {
    Ascii,
    BinaryLe,
}

struct PlyData {
    vertices: Vec<Point3<f64>>,
    colors: Option<Vec<[u8; 3]>>,
    faces: Vec<[usize; 3]>,
}

/// Reads values from either encoding through one interface.
enum ValueSource<'a> {
    Ascii(std::vec::IntoIter<String>),
    Binary { data: &'a [u8], pos: usize },
}

impl ValueSource<'_> {
    fn next(&mut self, ty: Scalar) -> Result<f64> {
        match self {
            ValueSource::Ascii(it) => it
                .next()
                .ok_or_else(|| Error::Parse("ply: unexpected end of data".into()))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("ply: {e}"))),
            ValueSource::Binary { data, pos } => {
                let size = ty.size();
                if *pos + size > data.len() {
                    return Err(Error::Parse("ply: unexpected end of data".into()));
                }
                let v = ty.read_le(&data[*pos..*pos + size]);
                *pos += size;
                Ok(v)
            }
        }
    }
}

fn read_ply_data(bytes: &[u8]) -> Result<PlyData> {
    let mut pos = 0;
    let mut header_lines = Vec::new();
    loop {
        let end = bytes[pos..].iter().position(|&b| b == b'\n').ok_or_else(|| Error::Parse("ply: unterminated header".into()))?;
        let line = String::from_utf8_lossy(&bytes[pos..pos + end]).trim().to_string();
        pos += end + 1;
        if line == "end_header" {
            break;
        }
        header_lines.push(line);
    }
    if header_lines.first().map(String::as_str) != Some("ply") {
        return Err(Error::Parse("ply: missing magic".into()));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    for line in &header_lines[1..] {
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.first().copied() {
            Some("format") => {
                format = Some(match t.get(1).copied() {
                    Some("ascii") => PlyFormat::Ascii,
                    Some("binary_little_endian") => PlyFormat::BinaryLe,
                    other => return Err(Error::Parse(format!("ply: unsupported format {other:?}"))),
                })
            }
            Some("element") => {
                let name = t.get(1).ok_or_else(|| Error::Parse("ply: element name".into()))?;
                let count = t.get(2).and_then(|c| c.parse().ok()).ok_or_else(|| Error::Parse("ply: element count".into()))?;
                elements.push(Element { name: name.to_string(), count, props: Vec::new() });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or_else(|| Error::Parse("ply: property before element".into()))?;
                let bad = || Error::Parse(format!("ply: bad property line `{line}`"));
                let prop = if t.get(1) == Some(&"list") {
                    Property::List {
                        count: t.get(2).and_then(|s| Scalar::parse(s)).ok_or_else(bad)?,
                        item: t.get(3).and_then(|s| Scalar::parse(s)).ok_or_else(bad)?,
                        name: t.get(4).ok_or_else(bad)?.to_string(),
                    }
                } else {
                    Property::Scalar {
                        ty: t.get(1).and_then(|s| Scalar::parse(s)).ok_or_else(bad)?,
                        name: t.get(2).ok_or_else(bad)?.to_string(),
                    }
                };
                el.props.push(prop);
            }
            _ => {}
        }
    }
    let format = format.ok_or_else(|| Error::Parse("ply: missing format line".into()))?;
    let mut src = match format {
        PlyFormat::Ascii => ValueSource::Ascii(
            String::from_utf8_lossy(&bytes[pos..]).split_whitespace().map(str::to_string).collect::<Vec<_>>().into_iter(),
        ),
        PlyFormat::BinaryLe => ValueSource::Binary { data: bytes, pos },
    };

    let mut vertices = Vec::new();
    let mut colors: Vec<[u8; 3]> = Vec::new();
    let mut has_colors = false;
    let mut faces = Vec::new();
    for el in &elements {
        for _ in 0..el.count {
            let mut xyz = [f64::NAN; 3];
            let mut rgb = [0u8; 3];
            for prop in &el.props {
                match prop {
                    Property::Scalar { name, ty } => {
                        let v = src.next(*ty)?;
                        if el.name == "vertex" {
                            match name.as_str() {
                                "x" => xyz[0] = v,
                                "y" => xyz[1] = v,
                                "z" => xyz[2] = v,
                                "red" => rgb[0] = v as u8,
                                "green" => rgb[1] = v as u8,
                                "blue" => rgb[2] = v as u8,
                                _ => {}
                            }
                        }
                    }
                    Property::List { name, count, item } => {
                        let n = src.next(*count)? as usize;
                        let mut idx = Vec::with_capacity(n);
                        for _ in 0..n {
                            idx.push(src.next(*item)?);
                        }
                        if el.name == "face" && (name == "vertex_indices" || name == "vertex_index") {
                            let idx: Vec<usize> = idx
                                .into_iter()
                                .map(|v| if v < 0.0 { Err(Error::Parse("ply: negative face index".into())) } else { Ok(v as usize) })
                                .collect::<Result<_>>()?;
                            fan(&idx, &mut faces);
                        }
                    }
                }
            }
            if el.name == "vertex" {
                has_colors |= el.props.iter().any(|p| matches!(p, Property::Scalar { name, .. } if name == "red"));
                vertices.push(Point3::new(xyz[0], xyz[1], xyz[2]));
                colors.push(rgb);
            }
        }
    }
    Ok(PlyData { vertices, colors: has_colors.then_some(colors), faces })
}

pub fn read_ply_mesh(bytes: &[u8]) -> Result<TriangleMesh> {
    let data = read_ply_data(bytes)?;
    TriangleMesh::with_colors(data.vertices, data.faces, data.colors)
}

pub fn read_ply_cloud(bytes: &[u8]) -> Result<PointCloud> {
    PointCloud::new(read_ply_data(bytes)?.vertices)
}

/// Binary little-endian PLY with float32 vertices and int32 face lists.
pub fn write_ply_mesh<W: Write>(mesh: &TriangleMesh, mut w: W) -> Result<()> {
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nelement face {}\nproperty list uchar int vertex_indices\nend_header\n",
        mesh.vertices().len(),
        mesh.faces().len()
    )?;
    for v in mesh.vertices() {
        for c in [v.x, v.y, v.z] {
            w.write_all(&(c as f32).to_le_bytes())?;
        }
    }
    for f in mesh.faces() {
        w.write_all(&[3u8])?;
        for &i in f {
            w.write_all(&(i as i32).to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_xyz<R: BufRead>(reader: R) -> Result<PointCloud> {
    let mut points = Vec::new();
    for (ln, line) in reader.lines().enumerate() {
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let v: Vec<f64> = body.split_whitespace().map(|t| t.parse::<f64>().map_err(|e| parse_err(ln + 1, e))).collect::<Result<_>>()?;
        if v.len() != 3 {
            return Err(parse_err(ln + 1, format!("expected 3 values, found {}", v.len())));
        }
        points.push(Point3::new(v[0], v[1], v[2]));
    }
    PointCloud::new(points)
}

pub fn write_xyz<W: Write>(cloud: &PointCloud, mut w: W) -> Result<()> {
    for p in cloud.points() {
        writeln!(w, "{} {} {}", p.x, p.y, p.z)?;
    }
    Ok(())
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase()
}

/// Loads a mesh, choosing the format from the file extension.
pub fn load_mesh(path: &Path) -> Result<TriangleMesh> {
    match extension(path).as_str() {
        "obj" => read_obj(std::io::BufReader::new(std::fs::File::open(path)?)),
        "ply" => read_ply_mesh(&std::fs::read(path)?),
        other => Err(Error::Parse(format!("unsupported mesh extension `{other}`"))),
    }
}

/// Loads a point cloud from PLY or whitespace-separated text.
pub fn load_cloud(path: &Path) -> Result<PointCloud> {
    match extension(path).as_str() {
        "ply" => read_ply_cloud(&std::fs::read(path)?),
        _ => read_xyz(std::io::BufReader::new(std::fs::File::open(path)?)),
    }
}
