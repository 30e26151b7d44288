//! Wavefront OBJ subset carrying face tags as groups.
//!
//! Output layout: `o <name>`, all `v x y z` lines with six fractional
//! digits, then for each run of equally tagged triangles a
//! `g feature_<id>_<role>` line followed by `f a b c` lines (1-based).
//! Import accepts `v`, `f`, `g`, `o`, comments and blank lines.

use std::fmt::Write as _;
use std::io;

use thiserror::Error;

use crate::geom::Vec3;
use crate::mesh::TriMesh;
use crate::tag::FaceTag;

#[derive(Debug, Error)]
pub enum ObjError {
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: vertex index {index} out of range (1..={count})")]
    IndexOutOfRange { line: usize, index: i64, count: usize },
    #[error("line {line}: unsupported directive '{directive}'")]
    Unsupported { line: usize, directive: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn coord(out: &mut String, v: f64) {
    let start = out.len();
    write!(out, "{v:.6}").expect("write to string");
    if &out[start..] == "-0.000000" {
        out.replace_range(start..start + 1, "");
    }
}

/// Serializes `mesh` to the canonical OBJ text.
pub fn to_obj_string(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(64 + mesh.vertices.len() * 36 + mesh.triangles.len() * 24);
    writeln!(s, "o {}", mesh.name).unwrap();
    for v in &mesh.vertices {
        s.push_str("v ");
        coord(&mut s, v.x);
        s.push(' ');
        coord(&mut s, v.y);
        s.push(' ');
        coord(&mut s, v.z);
        s.push('\n');
    }
    let mut current: Option<u32> = None;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let tag = mesh.triangle_tags[t];
        if current != Some(tag) {
            writeln!(s, "g {}", mesh.tags[tag as usize].group_name()).unwrap();
            current = Some(tag);
        }
        writeln!(s, "f {} {} {}", tri[0] + 1, tri[1] + 1, tri[2] + 1).unwrap();
    }
    s
}

pub fn export_obj<W: io::Write>(mesh: &TriMesh, mut sink: W) -> io::Result<()> {
    sink.write_all(to_obj_string(mesh).as_bytes())
}

/// Parses the OBJ subset back into a tagged mesh.
pub fn import_obj(text: &str) -> Result<TriMesh, ObjError> {
    let mut mesh = TriMesh::default();
    let mut current: Option<u32> = None;
    let mut pending_faces: Vec<(usize, [i64; 3], u32)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (directive, rest) = trimmed
            .split_once(char::is_whitespace)
            .map(|(d, r)| (d, r.trim()))
            .unwrap_or((trimmed, ""));
        let malformed = |message: String| ObjError::Malformed { line, message };
        match directive {
            "o" => mesh.name = rest.to_string(),
            "v" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(malformed(format!("expected 3 coordinates, got {}", parts.len())));
                }
                let mut c = [0.0; 3];
                for (k, p) in parts.iter().enumerate() {
                    c[k] = p
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| malformed(format!("bad coordinate '{p}'")))?;
                }
                mesh.vertices.push(Vec3::from_array(c));
            }
            "g" => {
                let tag = FaceTag::from_group_name(rest)
                    .ok_or_else(|| malformed(format!("group '{rest}' is not feature_<id>_<role>")))?;
                let idx = match mesh.tags.iter().position(|t| *t == tag) {
                    Some(k) => k as u32,
                    None => {
                        mesh.tags.push(tag);
                        (mesh.tags.len() - 1) as u32
                    }
                };
                current = Some(idx);
            }
            "f" => {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(malformed(format!("expected a triangle, got {} indices", parts.len())));
                }
                let mut idx = [0i64; 3];
                for (k, p) in parts.iter().enumerate() {
                    idx[k] = p
                        .parse::<i64>()
                        .map_err(|_| malformed(format!("bad vertex index '{p}'")))?;
                }
                let tag = current.ok_or_else(|| malformed("face outside any group".into()))?;
                pending_faces.push((line, idx, tag));
            }
            other => {
                return Err(ObjError::Unsupported {
                    line,
                    directive: other.to_string(),
                })
            }
        }
    }
    let count = mesh.vertices.len();
    for (line, idx, tag) in pending_faces {
        let mut tri = [0u32; 3];
        for k in 0..3 {
            let index = idx[k];
            if index < 1 || index as usize > count {
                return Err(ObjError::IndexOutOfRange { line, index, count });
            }
            tri[k] = (index - 1) as u32;
        }
        mesh.triangles.push(tri);
        mesh.triangle_tags.push(tag);
    }
    Ok(mesh)
}
