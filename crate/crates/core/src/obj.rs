//! Wavefront OBJ reading and writing, restricted to `v` and `f` records.
//!
//! Normals, texture coordinates, materials and grouping statements are
//! skipped. Polygonal faces are fan-triangulated around their first corner.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::{TriangleMesh, Vec3};

pub fn load_obj(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let mut mesh = parse_obj(&text)?;
    if mesh.name.is_none() {
        mesh.name = path.file_stem().map(|s| s.to_string_lossy().into_owned());
    }
    Ok(mesh)
}

pub fn parse_obj(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();
    let mut name = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut fields = line.split_whitespace();
        let Some(tag) = fields.next() else { continue };
        match tag {
            "v" => {
                let coords: Vec<&str> = fields.collect();
                if coords.len() < 3 {
                    return Err(parse_err(line_no, "vertex record needs three coordinates"));
                }
                let mut p = [0.0; 3];
                for (slot, tok) in p.iter_mut().zip(&coords) {
                    *slot = tok
                        .parse::<f64>()
                        .map_err(|_| parse_err(line_no, format!("bad coordinate `{tok}`")))?;
                }
                vertices.push(Vec3::new(p[0], p[1], p[2]));
            }
            "f" => {
                let mut corners = Vec::new();
                for tok in fields {
                    let idx = tok.split('/').next().unwrap_or("");
                    let idx: i64 = idx
                        .parse()
                        .map_err(|_| parse_err(line_no, format!("bad face index `{tok}`")))?;
                    if idx == 0 {
                        return Err(parse_err(line_no, "face indices are 1-based; found 0"));
                    }
                    corners.push(idx);
                }
                if corners.len() < 3 {
                    return Err(parse_err(line_no, "face needs at least three corners"));
                }
                faces.push((line_no, corners));
            }
            "o" if name.is_none() => {
                let rest: Vec<&str> = fields.collect();
                if !rest.is_empty() {
                    name = Some(rest.join(" "));
                }
            }
            _ => {}
        }
    }

    let n = vertices.len() as i64;
    let mut triangles = Vec::new();
    for (line_no, corners) in faces {
        let mut resolved = Vec::with_capacity(corners.len());
        for idx in corners {
            // Negative indices count back from the most recent vertex.
            let zero_based = if idx > 0 { idx - 1 } else { n + idx };
            if zero_based < 0 || zero_based >= n {
                return Err(Error::structure(format!(
                    "face on line {line_no} references vertex {idx} but only {n} vertices exist"
                )));
            }
            resolved.push(zero_based as u32);
        }
        for k in 1..resolved.len() - 1 {
            triangles.push([resolved[0], resolved[k], resolved[k + 1]]);
        }
    }

    let mesh = TriangleMesh { vertices, triangles, name };
    mesh.check_structure()?;
    Ok(mesh)
}

/// Serializes the mesh. Coordinates use the shortest representation that
/// round-trips exactly, so output bytes depend only on the mesh.
pub fn write_obj(mesh: &TriangleMesh, header: &[String]) -> Result<String> {
    if mesh.is_empty() {
        return Err(Error::invalid("refusing to write a mesh with zero triangles"));
    }
    mesh.check_structure()?;
    let mut out = String::with_capacity(mesh.vertex_count() * 40 + mesh.triangle_count() * 24);
    for line in header {
        let _ = writeln!(out, "# {line}");
    }
    if let Some(name) = &mesh.name {
        let _ = writeln!(out, "o {name}");
    }
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    Ok(out)
}

pub fn save_obj(mesh: &TriangleMesh, path: impl AsRef<Path>) -> Result<()> {
    save_obj_with_header(mesh, path, &[])
}

pub fn save_obj_with_header(mesh: &TriangleMesh, path: impl AsRef<Path>, header: &[String]) -> Result<()> {
    let text = write_obj(mesh, header)?;
    fs::write(path, text)?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}
