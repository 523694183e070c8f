//! STL (ASCII and binary) and OBJ readers and writers.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Point3, Vector3};

use super::{MeshError, MeshFormat, TriangleMesh};

const STL_HEADER: usize = 80;
const STL_RECORD: usize = 50;

/// Guesses a format from a file extension.
pub fn format_from_path(path: &Path) -> Option<MeshFormat> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        // ASCII vs binary is sniffed from the bytes.
        "stl" => Some(MeshFormat::StlBinary),
        "obj" => Some(MeshFormat::Obj),
        _ => None,
    }
}

/// Parses mesh bytes.
///
/// With a hint of either STL variant the ASCII/binary distinction is still
/// detected from content. Without a hint, binary STL is recognised by its
/// record-count/size agreement, ASCII STL by its `solid`/`facet` keywords and
/// OBJ by `v`/`f` records.
pub fn parse_mesh(bytes: &[u8], format_hint: Option<MeshFormat>) -> Result<TriangleMesh, MeshError> {
    if bytes.is_empty() {
        return Err(MeshError::MalformedFile("empty input".into()));
    }
    match format_hint {
        Some(MeshFormat::Obj) => parse_obj(bytes),
        Some(MeshFormat::StlAscii | MeshFormat::StlBinary) => {
            if looks_like_ascii_stl(bytes) {
                parse_stl_ascii(bytes)
            } else {
                parse_stl_binary(bytes)
            }
        }
        None => {
            if binary_size_matches(bytes) {
                parse_stl_binary(bytes)
            } else if looks_like_ascii_stl(bytes) {
                parse_stl_ascii(bytes)
            } else if looks_like_obj(bytes) {
                parse_obj(bytes)
            } else if bytes.len() >= STL_HEADER + 4 && std::str::from_utf8(bytes).is_err() {
                // Binary payload whose declared size disagrees.
                parse_stl_binary(bytes)
            } else {
                Err(MeshError::UnsupportedFormat("content is neither STL nor OBJ".into()))
            }
        }
    }
}

fn binary_size_matches(bytes: &[u8]) -> bool {
    if bytes.len() < STL_HEADER + 4 {
        return false;
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    count
        .checked_mul(STL_RECORD)
        .and_then(|b| b.checked_add(STL_HEADER + 4))
        == Some(bytes.len())
}

fn looks_like_ascii_stl(bytes: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(bytes) else {
        return false;
    };
    let trimmed = text.trim_start();
    trimmed.starts_with("solid") && (text.contains("facet") || text.contains("endsolid"))
}

fn looks_like_obj(bytes: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(bytes) else {
        return false;
    };
    text.lines()
        .map(str::trim_start)
        .any(|l| l.starts_with("v ") || l.starts_with("f "))
}

fn parse_stl_binary(bytes: &[u8]) -> Result<TriangleMesh, MeshError> {
    if bytes.len() < STL_HEADER + 4 {
        return Err(MeshError::MalformedFile(format!(
            "binary STL needs at least 84 bytes, got {}",
            bytes.len()
        )));
    }
    let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    let needed = count
        .checked_mul(STL_RECORD)
        .and_then(|b| b.checked_add(STL_HEADER + 4))
        .ok_or_else(|| MeshError::MalformedFile("triangle count overflows".into()))?;
    if bytes.len() < needed {
        return Err(MeshError::MalformedFile(format!(
            "binary STL declares {count} triangles ({needed} bytes) but has {} bytes",
            bytes.len()
        )));
    }
    let read_f32 = |off: usize| f32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as f64;
    let mut soup = Vec::with_capacity(count);
    for t in 0..count {
        // skip the 12-byte facet normal
        let base = STL_HEADER + 4 + t * STL_RECORD + 12;
        let v = |k: usize| {
            let o = base + 12 * k;
            Point3::new(read_f32(o), read_f32(o + 4), read_f32(o + 8))
        };
        soup.push([v(0), v(1), v(2)]);
    }
    Ok(TriangleMesh::from_soup(&soup, MeshFormat::StlBinary))
}

fn parse_stl_ascii(bytes: &[u8]) -> Result<TriangleMesh, MeshError> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| MeshError::MalformedFile(format!("ASCII STL is not UTF-8: {e}")))?;
    let mut soup = Vec::new();
    let mut current: Vec<Point3<f64>> = Vec::with_capacity(3);
    for (lineno, line) in text.lines().enumerate() {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("vertex") => {
                let coords: Vec<f64> = tokens
                    .map(|t| t.parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|e| MeshError::MalformedFile(format!("line {}: {e}", lineno + 1)))?;
                if coords.len() != 3 {
                    return Err(MeshError::MalformedFile(format!(
                        "line {}: vertex needs 3 coordinates",
                        lineno + 1
                    )));
                }
                current.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("endloop") => {
                if current.len() != 3 {
                    return Err(MeshError::MalformedFile(format!(
                        "line {}: facet has {} vertices",
                        lineno + 1,
                        current.len()
                    )));
                }
                soup.push([current[0], current[1], current[2]]);
                current.clear();
            }
            _ => {}
        }
    }
    if !current.is_empty() {
        return Err(MeshError::MalformedFile("unterminated facet".into()));
    }
    Ok(TriangleMesh::from_soup(&soup, MeshFormat::StlAscii))
}

fn parse_obj(bytes: &[u8]) -> Result<TriangleMesh, MeshError> {
    let text = std::str::from_utf8(bytes).map_err(|e| MeshError::MalformedFile(format!("OBJ is not UTF-8: {e}")))?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let bad = |msg: String| MeshError::MalformedFile(format!("line {}: {msg}", lineno + 1));
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let coords: Vec<f64> = tokens
                    .take(3)
                    .map(str::parse::<f64>)
                    .collect::<Result<_, _>>()
                    .map_err(|e| bad(e.to_string()))?;
                if coords.len() != 3 {
                    return Err(bad("vertex needs 3 coordinates".into()));
                }
                vertices.push(Point3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for tok in tokens {
                    let head = tok.split('/').next().unwrap_or("");
                    let raw: i64 = head.parse().map_err(|_| bad(format!("bad index {tok:?}")))?;
                    let resolved = match raw {
                        0 => return Err(bad("OBJ indices are 1-based".into())),
                        r if r > 0 => r - 1,
                        r => vertices.len() as i64 + r,
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(bad(format!("index {raw} out of range")));
                    }
                    idx.push(resolved as u32);
                }
                if idx.len() < 3 {
                    return Err(bad("face needs at least 3 vertices".into()));
                }
                // fan triangulation
                for w in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[w], idx[w + 1]]);
                }
            }
            _ => {}
        }
    }
    TriangleMesh::new(vertices, triangles, MeshFormat::Obj)
}

fn facet_normal(tri: &[Point3<f64>; 3]) -> Vector3<f64> {
    let n = (tri[1] - tri[0]).cross(&(tri[2] - tri[0]));
    n.try_normalize(0.0).unwrap_or_else(Vector3::zeros)
}

pub fn write_stl_ascii(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = String::from("solid mesh\n");
    for tri in mesh.triangle_points() {
        let n = facet_normal(&tri);
        let _ = writeln!(out, "  facet normal {} {} {}", n.x, n.y, n.z);
        out.push_str("    outer loop\n");
        for p in &tri {
            let _ = writeln!(out, "      vertex {} {} {}", p.x, p.y, p.z);
        }
        out.push_str("    endloop\n  endfacet\n");
    }
    out.push_str("endsolid mesh\n");
    out.into_bytes()
}

/// Little-endian binary STL. Coordinates are narrowed to `f32`.
pub fn write_stl_binary(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(STL_HEADER + 4 + STL_RECORD * mesh.triangles.len());
    let mut header = [0u8; STL_HEADER];
    let tag = b"binary stl";
    header[..tag.len()].copy_from_slice(tag);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for tri in mesh.triangle_points() {
        let n = facet_normal(&tri);
        for v in std::iter::once(&n).chain(tri.iter().map(|p| &p.coords)) {
            for a in 0..3 {
                out.extend_from_slice(&(v[a] as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

pub fn write_obj(mesh: &TriangleMesh) -> Vec<u8> {
    let mut out = String::new();
    for p in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", p.x, p.y, p.z);
    }
    for [a, b, c] in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", a + 1, b + 1, c + 1);
    }
    out.into_bytes()
}
