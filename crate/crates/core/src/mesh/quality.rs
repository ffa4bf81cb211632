//! Mesh quality validation: maximum-angle condition, node valence cap,
//! and the local element orientation condition via bounding rectangles
//! of node patches.

use serde::{Deserialize, Serialize};

use super::patch::{node_patches, ClassificationParams, NodeClass};
use super::{Point2, Triangulation};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QualityParams {
    /// Maximum admissible interior angle (radians), must be `< pi`.
    pub max_angle: f64,
    /// Cap on the number of triangles containing a node.
    pub max_valence: usize,
    /// The patch bounding rectangle must satisfy `|R_z| <= kappa * |omega_z|`.
    pub rect_kappa: f64,
    /// Angular tolerance (radians) for boundary-parallel rectangle sides
    /// and for deciding whether a boundary node is a corner.
    pub parallel_tol: f64,
    /// When set, additionally require every triangle's maximum angle to be
    /// `<= pi/2 + alpha1 * h_T / H_T` (quasi-non-obtuse elements).
    pub quasi_nonobtuse_alpha1: Option<f64>,
    pub classification: ClassificationParams,
}

impl Default for QualityParams {
    fn default() -> Self {
        Self {
            max_angle: 0.9 * std::f64::consts::PI,
            max_valence: 16,
            rect_kappa: 4.0,
            parallel_tol: 1e-9,
            quasi_nonobtuse_alpha1: None,
            classification: ClassificationParams::default(),
        }
    }
}

impl QualityParams {
    /// Defaults plus the quasi-non-obtuse check used for layer-adapted
    /// tensor meshes.
    pub fn structured() -> Self {
        Self {
            quasi_nonobtuse_alpha1: Some(1.0),
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum ViolationKind {
    MaxAngle,
    QuasiNonObtuse,
    Valence,
    RectangleRatio,
    BoundaryOrientation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Triangle id for angle checks, node id otherwise.
    pub id: usize,
    pub value: f64,
    pub limit: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeshQualityReport {
    pub max_interior_angle: f64,
    pub max_valence: usize,
    pub orientation_ok: bool,
    /// Per-node ratio `|R_z| / |omega_z|` of the checked rectangle.
    pub rect_ratios: Vec<f64>,
    pub n_anisotropic: usize,
    pub n_regular: usize,
    pub n_unclassified: usize,
    pub violations: Vec<Violation>,
}

impl MeshQualityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every configured condition; violations are reported, not thrown.
pub fn validate_mesh(mesh: &Triangulation, params: &QualityParams) -> MeshQualityReport {
    let mut violations = Vec::new();
    let mut max_angle: f64 = 0.0;

    for t in 0..mesh.triangles.len() {
        let g = mesh.triangle_geometry(t);
        let tri_max = g.angles.iter().cloned().fold(0.0, f64::max);
        max_angle = max_angle.max(tri_max);
        if tri_max > params.max_angle {
            violations.push(Violation {
                kind: ViolationKind::MaxAngle,
                id: t,
                value: tri_max,
                limit: params.max_angle,
            });
        }
        if let Some(alpha1) = params.quasi_nonobtuse_alpha1 {
            let limit = std::f64::consts::FRAC_PI_2 + alpha1 * g.min_height / g.max_edge;
            if tri_max > limit + 1e-12 {
                violations.push(Violation {
                    kind: ViolationKind::QuasiNonObtuse,
                    id: t,
                    value: tri_max,
                    limit,
                });
            }
        }
    }

    let mut max_valence = 0;
    for (z, tris) in mesh.node_to_triangles.iter().enumerate() {
        max_valence = max_valence.max(tris.len());
        if tris.len() > params.max_valence {
            violations.push(Violation {
                kind: ViolationKind::Valence,
                id: z,
                value: tris.len() as f64,
                limit: params.max_valence as f64,
            });
        }
    }

    let patches = node_patches(mesh, &params.classification);
    let mut rect_ratios = Vec::with_capacity(patches.len());
    let mut orientation_ok = true;
    let (mut n_ani, mut n_reg, mut n_unc) = (0, 0, 0);
    for patch in &patches {
        match patch.class {
            NodeClass::Anisotropic => n_ani += 1,
            NodeClass::Regular => n_reg += 1,
            NodeClass::Unclassified => n_unc += 1,
        }
        let pts: Vec<Point2> = patch
            .vertex_ids(mesh)
            .into_iter()
            .map(|v| mesh.points[v])
            .collect();
        let hull = convex_hull(&pts);

        // Boundary nodes that are not corners must admit a rectangle with a
        // side parallel to the boundary segment through the node.
        let boundary_dir = boundary_direction(mesh, patch.node, params.parallel_tol);
        let (rect_area, kind) = match boundary_dir {
            Some(dir) => (aligned_rect_area(&hull, dir), ViolationKind::BoundaryOrientation),
            None => (min_area_rect(&hull), ViolationKind::RectangleRatio),
        };
        let ratio = rect_area / patch.area;
        rect_ratios.push(ratio);
        if ratio > params.rect_kappa {
            if matches!(kind, ViolationKind::BoundaryOrientation) {
                orientation_ok = false;
            }
            violations.push(Violation {
                kind,
                id: patch.node,
                value: ratio,
                limit: params.rect_kappa,
            });
        }
    }

    MeshQualityReport {
        max_interior_angle: max_angle,
        max_valence,
        orientation_ok,
        rect_ratios,
        n_anisotropic: n_ani,
        n_regular: n_reg,
        n_unclassified: n_unc,
        violations,
    }
}

/// Direction of the boundary through node `z` when `z` is a non-corner
/// boundary node: its two boundary edges must be collinear within `tol`.
fn boundary_direction(mesh: &Triangulation, z: usize, tol: f64) -> Option<(f64, f64)> {
    if !mesh.is_boundary_node(z) {
        return None;
    }
    let bedges: Vec<usize> = mesh.node_to_edges[z]
        .iter()
        .copied()
        .filter(|&e| mesh.edges[e].is_boundary)
        .collect();
    if bedges.len() != 2 {
        return None;
    }
    let dir = |e: usize| {
        let [a, b] = mesh.edges[e].nodes;
        let (pa, pb) = (mesh.points[a], mesh.points[b]);
        let len = pa.dist(pb);
        ((pb.x - pa.x) / len, (pb.y - pa.y) / len)
    };
    let d0 = dir(bedges[0]);
    let d1 = dir(bedges[1]);
    let sin = (d0.0 * d1.1 - d0.1 * d1.0).abs();
    if sin <= tol {
        Some(d0)
    } else {
        None // geometric corner
    }
}

/// Andrew's monotone chain. Returns hull vertices counterclockwise.
pub(crate) fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point2, a: Point2, b: Point2| {
        (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
    };
    let mut lower: Vec<Point2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Area of the minimum-area enclosing rectangle (rotating calipers: the
/// optimum has a side collinear with a hull edge).
pub(crate) fn min_area_rect(hull: &[Point2]) -> f64 {
    if hull.len() < 3 {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let len = a.dist(b);
        if len == 0.0 {
            continue;
        }
        let dir = ((b.x - a.x) / len, (b.y - a.y) / len);
        best = best.min(aligned_rect_area(hull, dir));
    }
    best
}

/// Area of the smallest enclosing rectangle with a side parallel to `dir`.
pub(crate) fn aligned_rect_area(points: &[Point2], dir: (f64, f64)) -> f64 {
    let mut umin = f64::INFINITY;
    let mut umax = f64::NEG_INFINITY;
    let mut vmin = f64::INFINITY;
    let mut vmax = f64::NEG_INFINITY;
    for p in points {
        let u = p.x * dir.0 + p.y * dir.1;
        let v = -p.x * dir.1 + p.y * dir.0;
        umin = umin.min(u);
        umax = umax.max(u);
        vmin = vmin.min(v);
        vmax = vmax.max(v);
    }
    (umax - umin) * (vmax - vmin)
}
