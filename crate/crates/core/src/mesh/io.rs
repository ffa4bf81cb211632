//! Mesh JSON I/O.
//!
//! Format: `{"index_base": B, "points": [[x, y], ...],
//! "triangles": [[i, j, k], ...], "boundary_nodes": [...]}` with all indices
//! offset by the declared base. Writers emit 0-based indices and doubles
//! with 17 significant digits, so coordinates round-trip exactly.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use super::{build_triangulation, MeshError, Point2, Triangulation};

#[derive(Deserialize)]
struct MeshFile {
    index_base: u64,
    points: Vec<[f64; 2]>,
    triangles: Vec<[u64; 3]>,
    #[serde(default)]
    boundary_nodes: Option<Vec<u64>>,
}

pub fn mesh_to_json(mesh: &Triangulation) -> String {
    let mut s = String::new();
    s.push_str("{\n  \"index_base\": 0,\n  \"points\": [\n");
    for (i, p) in mesh.points.iter().enumerate() {
        let sep = if i + 1 < mesh.points.len() { "," } else { "" };
        let _ = writeln!(s, "    [{:.16e}, {:.16e}]{}", p.x, p.y, sep);
    }
    s.push_str("  ],\n  \"triangles\": [\n");
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let sep = if t + 1 < mesh.triangles.len() { "," } else { "" };
        let v = tri.vertices;
        let _ = writeln!(s, "    [{}, {}, {}]{}", v[0], v[1], v[2], sep);
    }
    s.push_str("  ],\n  \"boundary_nodes\": [");
    for (i, z) in mesh.boundary_nodes.iter().enumerate() {
        let sep = if i + 1 < mesh.boundary_nodes.len() { ", " } else { "" };
        let _ = write!(s, "{z}{sep}");
    }
    s.push_str("]\n}\n");
    s
}

pub fn mesh_from_json(text: &str) -> Result<Triangulation, MeshError> {
    let file: MeshFile =
        serde_json::from_str(text).map_err(|e| MeshError::Parse(e.to_string()))?;
    let base = file.index_base;
    if base > 1 {
        return Err(MeshError::Parse(format!(
            "unsupported index_base {base} (expected 0 or 1)"
        )));
    }
    let n = file.points.len() as u64;
    let rebase = |idx: u64, what: &str| -> Result<usize, MeshError> {
        if idx < base || idx - base >= n {
            return Err(MeshError::Parse(format!(
                "{what} index {idx} out of range for index_base {base} and {n} points"
            )));
        }
        Ok((idx - base) as usize)
    };
    let points: Vec<Point2> = file.points.iter().map(|&[x, y]| Point2::new(x, y)).collect();
    let mut tris = Vec::with_capacity(file.triangles.len());
    for t in &file.triangles {
        tris.push([
            rebase(t[0], "triangle vertex")?,
            rebase(t[1], "triangle vertex")?,
            rebase(t[2], "triangle vertex")?,
        ]);
    }
    let boundary = match file.boundary_nodes {
        Some(list) => {
            let mut nodes = Vec::with_capacity(list.len());
            for &z in &list {
                nodes.push(rebase(z, "boundary node")?);
            }
            Some(nodes)
        }
        None => None,
    };
    build_triangulation(points, tris, boundary.as_deref())
}

pub fn write_mesh(mesh: &Triangulation, path: impl AsRef<Path>) -> Result<(), MeshError> {
    std::fs::write(path, mesh_to_json(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<Triangulation, MeshError> {
    let text = std::fs::read_to_string(path)?;
    mesh_from_json(&text)
}
