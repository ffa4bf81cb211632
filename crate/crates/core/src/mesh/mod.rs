//! Triangulation kernel: geometry, topology (edges, node patches),
//! anisotropy classification, mesh quality validation, generators and
//! JSON file I/O.
//!
//! All indices are 0-based. Triangles are stored counterclockwise; the
//! builder repairs flipped input. A mesh is *conforming*: every interior
//! edge is shared by exactly two triangles.

mod generate;
mod io;
mod patch;
mod quality;

pub use generate::{generate_patch, generate_shishkin, generate_uniform, PatchStyle};
pub use io::{mesh_from_json, mesh_to_json, read_mesh, write_mesh};
pub use patch::{node_patch, node_patches, ClassificationParams, NodeClass, NodePatch};
pub use quality::{validate_mesh, MeshQualityReport, QualityParams, Violation, ViolationKind};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance below which two points count as duplicates.
pub const DUPLICATE_TOL: f64 = 1e-14;

/// Relative area threshold: a triangle with `2|T| <= 1e-14 * H_T^2` is degenerate.
pub const DEGENERATE_REL: f64 = 1e-14;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("triangle {tri}: area {area:.3e} is degenerate relative to its longest edge")]
    DegenerateTriangle { tri: usize, area: f64 },
    #[error("edge ({0}, {1}) is adjacent to more than two triangles")]
    NonConforming(usize, usize),
    #[error("node {0} is not referenced by any triangle")]
    DanglingNode(usize),
    #[error("points {0} and {1} coincide within {DUPLICATE_TOL:.0e}")]
    DuplicatePoint(usize, usize),
    #[error("triangle {tri} references invalid or repeated vertex {vertex}")]
    InvalidVertexId { tri: usize, vertex: usize },
    #[error("declared boundary set disagrees with mesh topology at node {0}")]
    BoundaryMismatch(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A point of the polygonal domain.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Oriented triangle, vertex ids counterclockwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Triangle {
    pub vertices: [usize; 3],
}

/// Twice the signed area of the triangle (p0, p1, p2).
pub fn signed_area2(p0: Point2, p1: Point2, p2: Point2) -> f64 {
    (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y)
}

/// Derived per-triangle geometry. `min_height = 2 * area / max_edge` exactly.
#[derive(Clone, Copy, Debug)]
pub struct TriangleGeometry {
    pub area: f64,
    /// Longest edge length, `H_T`.
    pub max_edge: f64,
    /// Minimum height, `h_T = 2|T| / H_T`.
    pub min_height: f64,
    /// Interior angle at each vertex, radians.
    pub angles: [f64; 3],
    /// Edge lengths; entry `i` is the edge opposite vertex `i`.
    pub edge_lengths: [f64; 3],
}

impl TriangleGeometry {
    /// Geometry of the triangle (p0, p1, p2); `None` when degenerate.
    pub fn from_points(p0: Point2, p1: Point2, p2: Point2) -> Option<Self> {
        let pts = [p0, p1, p2];
        let area = 0.5 * signed_area2(p0, p1, p2).abs();
        let mut edge_lengths = [0.0; 3];
        for i in 0..3 {
            edge_lengths[i] = pts[(i + 1) % 3].dist(pts[(i + 2) % 3]);
        }
        let max_edge = edge_lengths.iter().cloned().fold(0.0, f64::max);
        if 2.0 * area <= DEGENERATE_REL * max_edge * max_edge {
            return None;
        }
        let mut angles = [0.0; 3];
        for i in 0..3 {
            let a = pts[(i + 1) % 3];
            let b = pts[(i + 2) % 3];
            let u = (a.x - pts[i].x, a.y - pts[i].y);
            let v = (b.x - pts[i].x, b.y - pts[i].y);
            let cross = u.0 * v.1 - u.1 * v.0;
            let dot = u.0 * v.0 + u.1 * v.1;
            angles[i] = cross.abs().atan2(dot);
        }
        Some(Self {
            area,
            max_edge,
            min_height: 2.0 * area / max_edge,
            angles,
            edge_lengths,
        })
    }

    /// Aspect ratio `H_T / h_T`.
    pub fn aspect(&self) -> f64 {
        self.max_edge / self.min_height
    }
}

/// Undirected mesh edge with its adjacent triangles.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Edge {
    /// Endpoint node ids, sorted ascending.
    pub nodes: [usize; 2],
    /// Adjacent triangle ids (one for boundary edges, two otherwise).
    pub triangles: Vec<usize>,
    pub is_boundary: bool,
    pub length: f64,
}

/// Conforming triangulation with derived edges and adjacency.
///
/// Immutable after construction; all queries are `&self` and safe for
/// shared concurrent reads.
#[derive(Clone, Debug)]
pub struct Triangulation {
    pub points: Vec<Point2>,
    pub triangles: Vec<Triangle>,
    pub edges: Vec<Edge>,
    /// Sorted ids of nodes lying on the domain boundary.
    pub boundary_nodes: Vec<usize>,
    pub node_to_triangles: Vec<Vec<usize>>,
    pub node_to_edges: Vec<Vec<usize>>,
    boundary_flag: Vec<bool>,
}

impl Triangulation {
    pub fn n_nodes(&self) -> usize {
        self.points.len()
    }

    pub fn is_boundary_node(&self, z: usize) -> bool {
        self.boundary_flag[z]
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        let v = self.triangles[t].vertices;
        [self.points[v[0]], self.points[v[1]], self.points[v[2]]]
    }

    /// Geometry of triangle `t`; the builder guarantees non-degeneracy.
    pub fn triangle_geometry(&self, t: usize) -> TriangleGeometry {
        let [p0, p1, p2] = self.triangle_points(t);
        TriangleGeometry::from_points(p0, p1, p2).expect("builder rejects degenerate triangles")
    }

    /// Edge id joining nodes `a` and `b`, if present.
    pub fn find_edge(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { [a, b] } else { [b, a] };
        self.node_to_edges[a]
            .iter()
            .copied()
            .find(|&e| self.edges[e].nodes == key)
    }
}

/// Assembles a conforming triangulation from raw points and vertex triples.
///
/// Clockwise triangles are reoriented. When `declared_boundary` is given it
/// must equal the set of endpoints of single-triangle edges.
pub fn build_triangulation(
    points: Vec<Point2>,
    triangle_vertices: Vec<[usize; 3]>,
    declared_boundary: Option<&[usize]>,
) -> Result<Triangulation, MeshError> {
    let n = points.len();
    for (i, p) in points.iter().enumerate() {
        if !p.x.is_finite() || !p.y.is_finite() {
            return Err(MeshError::InvalidParams(format!(
                "point {i} has non-finite coordinates"
            )));
        }
    }

    // Duplicate detection: lexicographic sort, then a forward window in x.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (points[a].x, points[a].y)
            .partial_cmp(&(points[b].x, points[b].y))
            .unwrap()
    });
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if points[j].x - points[i].x > DUPLICATE_TOL {
                break;
            }
            if (points[j].y - points[i].y).abs() <= DUPLICATE_TOL
                && points[i].dist(points[j]) <= DUPLICATE_TOL
            {
                return Err(MeshError::DuplicatePoint(i.min(j), i.max(j)));
            }
        }
    }

    let mut triangles = Vec::with_capacity(triangle_vertices.len());
    for (t, &verts) in triangle_vertices.iter().enumerate() {
        for &v in &verts {
            if v >= n {
                return Err(MeshError::InvalidVertexId { tri: t, vertex: v });
            }
        }
        if verts[0] == verts[1] || verts[1] == verts[2] || verts[0] == verts[2] {
            return Err(MeshError::InvalidVertexId {
                tri: t,
                vertex: verts[0],
            });
        }
        let mut v = verts;
        if signed_area2(points[v[0]], points[v[1]], points[v[2]]) < 0.0 {
            v.swap(1, 2);
        }
        let geom = TriangleGeometry::from_points(points[v[0]], points[v[1]], points[v[2]]);
        match geom {
            None => {
                let area = 0.5 * signed_area2(points[v[0]], points[v[1]], points[v[2]]).abs();
                return Err(MeshError::DegenerateTriangle { tri: t, area });
            }
            Some(_) => triangles.push(Triangle { vertices: v }),
        }
    }

    let mut used = vec![false; n];
    for tri in &triangles {
        for &v in &tri.vertices {
            used[v] = true;
        }
    }
    if let Some(z) = used.iter().position(|&u| !u) {
        return Err(MeshError::DanglingNode(z));
    }

    // Edge map keyed by sorted endpoints; BTreeMap keeps edge ids deterministic.
    let mut edge_map: std::collections::BTreeMap<[usize; 2], Vec<usize>> =
        std::collections::BTreeMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        let v = tri.vertices;
        for (a, b) in [(v[0], v[1]), (v[1], v[2]), (v[2], v[0])] {
            let key = if a < b { [a, b] } else { [b, a] };
            edge_map.entry(key).or_default().push(t);
        }
    }
    let mut edges = Vec::with_capacity(edge_map.len());
    let mut boundary_flag = vec![false; n];
    for (key, tris) in edge_map {
        if tris.len() > 2 {
            return Err(MeshError::NonConforming(key[0], key[1]));
        }
        let is_boundary = tris.len() == 1;
        if is_boundary {
            boundary_flag[key[0]] = true;
            boundary_flag[key[1]] = true;
        }
        edges.push(Edge {
            nodes: key,
            triangles: tris,
            is_boundary,
            length: points[key[0]].dist(points[key[1]]),
        });
    }

    let boundary_nodes: Vec<usize> = (0..n).filter(|&z| boundary_flag[z]).collect();
    if let Some(declared) = declared_boundary {
        let mut declared_flag = vec![false; n];
        for &z in declared {
            if z >= n {
                return Err(MeshError::BoundaryMismatch(z));
            }
            declared_flag[z] = true;
        }
        if let Some(z) = (0..n).find(|&z| declared_flag[z] != boundary_flag[z]) {
            return Err(MeshError::BoundaryMismatch(z));
        }
    }

    let mut node_to_triangles = vec![Vec::new(); n];
    for (t, tri) in triangles.iter().enumerate() {
        for &v in &tri.vertices {
            node_to_triangles[v].push(t);
        }
    }
    let mut node_to_edges = vec![Vec::new(); n];
    for (e, edge) in edges.iter().enumerate() {
        node_to_edges[edge.nodes[0]].push(e);
        node_to_edges[edge.nodes[1]].push(e);
    }

    Ok(Triangulation {
        points,
        triangles,
        edges,
        boundary_nodes,
        node_to_triangles,
        node_to_edges,
        boundary_flag,
    })
}
