//! Node patches: the union of triangles around a node, its edge star,
//! characteristic sizes and the anisotropic/regular classification.

use serde::{Deserialize, Serialize};

use super::Triangulation;

/// Thresholds turning the asymptotic size relations into concrete checks.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ClassificationParams {
    /// An edge of the star is short when `|S| <= c_short * h_z`.
    pub c_short: f64,
    /// Anisotropic requires `H_z / h_z >= sigma_ani`.
    pub sigma_ani: f64,
    /// Anisotropic also requires every member triangle to have
    /// `h_T in [h_z/rho, rho*h_z]` and `H_T in [H_z/rho, rho*H_z]`.
    pub rho: f64,
    /// Regular requires `max_T H_T / h_T <= sigma_reg`.
    pub sigma_reg: f64,
}

impl Default for ClassificationParams {
    fn default() -> Self {
        Self {
            c_short: 2.0,
            sigma_ani: 10.0,
            rho: 3.0,
            sigma_reg: 5.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeClass {
    Anisotropic,
    Regular,
    Unclassified,
}

/// The patch `omega_z` of a node: member triangles, edge star, sizes and
/// classification. Immutable; construction for distinct nodes is pure.
#[derive(Clone, Debug)]
pub struct NodePatch {
    pub node: usize,
    /// Triangle ids of the patch.
    pub triangles: Vec<usize>,
    /// All edges originating at the node (the star `S_z`).
    pub star_edges: Vec<usize>,
    /// Star edges not on the domain boundary (`gamma_z`).
    pub interior_edges: Vec<usize>,
    /// Interior star edges of length `<= c_short * h_z` (`ring gamma_z`).
    pub short_edges: Vec<usize>,
    /// Patch diameter `H_z`, attained at patch vertices.
    pub diameter: f64,
    /// Characteristic width `h_z = |omega_z| / H_z`.
    pub width: f64,
    /// Patch area `|omega_z|`.
    pub area: f64,
    pub class: NodeClass,
}

impl NodePatch {
    /// Aspect ratio `H_z / h_z`.
    pub fn aspect(&self) -> f64 {
        self.diameter / self.width
    }

    /// Vertex ids of all member triangles, deduplicated.
    pub fn vertex_ids(&self, mesh: &Triangulation) -> Vec<usize> {
        let mut ids: Vec<usize> = self
            .triangles
            .iter()
            .flat_map(|&t| mesh.triangles[t].vertices)
            .collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Builds the patch of node `z`.
pub fn node_patch(mesh: &Triangulation, z: usize, params: &ClassificationParams) -> NodePatch {
    let triangles = mesh.node_to_triangles[z].clone();
    let star_edges = mesh.node_to_edges[z].clone();
    let interior_edges: Vec<usize> = star_edges
        .iter()
        .copied()
        .filter(|&e| !mesh.edges[e].is_boundary)
        .collect();

    let mut area = 0.0;
    let mut h_min = f64::INFINITY;
    let mut h_max: f64 = 0.0;
    let mut big_min = f64::INFINITY;
    let mut big_max: f64 = 0.0;
    let mut worst_aspect: f64 = 0.0;
    for &t in &triangles {
        let g = mesh.triangle_geometry(t);
        area += g.area;
        h_min = h_min.min(g.min_height);
        h_max = h_max.max(g.min_height);
        big_min = big_min.min(g.max_edge);
        big_max = big_max.max(g.max_edge);
        worst_aspect = worst_aspect.max(g.aspect());
    }

    // Diameter over patch vertices; exact for unions of triangles.
    let mut verts: Vec<usize> = triangles
        .iter()
        .flat_map(|&t| mesh.triangles[t].vertices)
        .collect();
    verts.sort_unstable();
    verts.dedup();
    let mut diameter: f64 = 0.0;
    for (i, &a) in verts.iter().enumerate() {
        for &b in &verts[i + 1..] {
            diameter = diameter.max(mesh.points[a].dist(mesh.points[b]));
        }
    }
    let width = area / diameter;

    let short_edges: Vec<usize> = interior_edges
        .iter()
        .copied()
        .filter(|&e| mesh.edges[e].length <= params.c_short * width)
        .collect();

    let aniso = diameter / width >= params.sigma_ani
        && h_min >= width / params.rho
        && h_max <= width * params.rho
        && big_min >= diameter / params.rho
        && big_max <= diameter * params.rho;
    let class = if aniso {
        NodeClass::Anisotropic
    } else if worst_aspect <= params.sigma_reg {
        NodeClass::Regular
    } else {
        NodeClass::Unclassified
    };

    NodePatch {
        node: z,
        triangles,
        star_edges,
        interior_edges,
        short_edges,
        diameter,
        width,
        area,
        class,
    }
}

/// Patches for every node of the mesh.
pub fn node_patches(mesh: &Triangulation, params: &ClassificationParams) -> Vec<NodePatch> {
    (0..mesh.n_nodes()).map(|z| node_patch(mesh, z, params)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_triangulation, generate_uniform, Point2};

    #[test]
    fn uniform_interior_patch_sizes() {
        let mesh = generate_uniform(4).unwrap();
        let params = ClassificationParams::default();
        // node (2,2) of the 5x5 grid
        let patch = node_patch(&mesh, 12, &params);
        assert_eq!(patch.triangles.len(), 6);
        assert!((patch.area - 0.1875).abs() < 1e-15);
        assert!((patch.diameter - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((patch.width - 0.1875 / 0.5f64.sqrt()).abs() < 1e-14);
        assert!((patch.width - 0.26517).abs() < 1e-5);
        assert_eq!(patch.class, NodeClass::Regular);
        assert_eq!(patch.interior_edges.len(), patch.star_edges.len());
    }

    #[test]
    fn tensor_cells_give_anisotropic_node() {
        // 2x2 tensor grid of 1e-3 x 0.25 cells around an interior node
        let (w, h) = (1e-3, 0.25);
        let mut points = Vec::new();
        for j in 0..3 {
            for i in 0..3 {
                points.push(Point2::new(i as f64 * w, j as f64 * h));
            }
        }
        let mut tris = Vec::new();
        for j in 0..2 {
            for i in 0..2 {
                let a = j * 3 + i;
                let b = a + 1;
                let c = a + 4;
                let d = a + 3;
                tris.push([a, b, c]);
                tris.push([a, c, d]);
            }
        }
        let mesh = build_triangulation(points, tris, None).unwrap();
        let patch = node_patch(&mesh, 4, &ClassificationParams::default());
        assert!(patch.aspect() > 10.0);
        assert_eq!(patch.class, NodeClass::Anisotropic);
        // at most two short edges in the star of an anisotropic node
        assert!(patch.short_edges.len() <= 2);
    }

    #[test]
    fn corner_node_patch() {
        let mesh = generate_uniform(2).unwrap();
        // corner (1, 0) -> node id 2: patch of one triangle, empty gamma_z
        let patch = node_patch(&mesh, 2, &ClassificationParams::default());
        assert_eq!(patch.triangles.len(), 1);
        assert!(patch.interior_edges.is_empty());
        assert_eq!(patch.class, NodeClass::Regular);
    }

    #[test]
    fn patch_area_matches_member_sum_and_width_bound() {
        let mesh = generate_uniform(5).unwrap();
        let params = ClassificationParams::default();
        for patch in node_patches(&mesh, &params) {
            let sum: f64 = patch
                .triangles
                .iter()
                .map(|&t| mesh.triangle_geometry(t).area)
                .sum();
            assert!((sum - patch.area).abs() <= 1e-12 * patch.area);
            assert!(patch.width <= patch.diameter * (1.0 + 1e-12));
            assert!(patch
                .short_edges
                .iter()
                .all(|e| patch.interior_edges.contains(e)));
        }
    }

    #[test]
    fn anisotropic_nodes_have_at_most_two_short_star_edges() {
        let mesh = crate::mesh::generate_shishkin(16, 1e-3, 2.0).unwrap();
        let params = ClassificationParams::default();
        let mut seen = 0;
        for patch in node_patches(&mesh, &params) {
            if patch.class == NodeClass::Anisotropic {
                seen += 1;
                let short = patch
                    .star_edges
                    .iter()
                    .filter(|&&e| mesh.edges[e].length <= params.c_short * patch.width)
                    .count();
                assert!(short <= 2, "node {}: {short} short star edges", patch.node);
            }
        }
        assert!(seen > 0);
    }

    #[test]
    fn classification_is_scale_invariant() {
        let base = generate_uniform(4).unwrap();
        let params = ClassificationParams::default();
        let reference: Vec<NodeClass> =
            node_patches(&base, &params).iter().map(|p| p.class).collect();
        for scale in [1e-3, 0.37, 42.0, 1e3] {
            let points: Vec<Point2> = base
                .points
                .iter()
                .map(|p| Point2::new(p.x * scale, p.y * scale))
                .collect();
            let tris: Vec<[usize; 3]> = base.triangles.iter().map(|t| t.vertices).collect();
            let scaled = build_triangulation(points, tris, None).unwrap();
            let got: Vec<NodeClass> =
                node_patches(&scaled, &params).iter().map(|p| p.class).collect();
            assert_eq!(got, reference);
        }
    }
}
