//! Residual a posteriori error estimator in the energy norm: per-node
//! jump and interior terms plus a global quadrature-residual term,
//!
//! `total^2 = sum_z w_z (eps J_z)^2 + sum_z ||min{1, H_z/eps} f_h^I||^2_{omega_z}
//!            + ||f_h - f_h^I||^2`,
//!
//! under three jump-weight schemes. Patch sums overlap by construction
//! (each triangle belongs to three patches); nothing is deduplicated.

use serde::{Deserialize, Serialize};

use crate::fem::{
    all_edge_jumps, element_mass, reaction_interpolation_error_sq, FemError, FemSolution,
    ProblemSpec,
};
use crate::mesh::{NodeClass, NodePatch, Triangulation};
use crate::quadrature::TriangleRule;

/// Weight applied to the squared jump residual of a node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightScheme {
    /// `min{|omega_z|, eps H_z}` on the whole edge star.
    NewEtaH,
    /// `min{|omega_z|, eps H_z^2 / h_z}` on the whole edge star.
    OldEtaH2h,
    /// `min{|omega_z|, eps h_z}` on the short edges plus
    /// `min{|omega_z|, eps H_z}` on the long ones.
    SplitShortLong,
}

impl WeightScheme {
    pub const ALL: [WeightScheme; 3] =
        [WeightScheme::NewEtaH, WeightScheme::OldEtaH2h, WeightScheme::SplitShortLong];

    pub fn id(&self) -> &'static str {
        match self {
            WeightScheme::NewEtaH => "new",
            WeightScheme::OldEtaH2h => "old",
            WeightScheme::SplitShortLong => "split",
        }
    }

    pub fn from_id(id: &str) -> Option<WeightScheme> {
        match id {
            "new" => Some(WeightScheme::NewEtaH),
            "old" => Some(WeightScheme::OldEtaH2h),
            "split" => Some(WeightScheme::SplitShortLong),
            _ => None,
        }
    }
}

/// Per-node contributions (all squared quantities are `>= 0`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeEstimate {
    pub node: usize,
    /// Weighted squared jump contribution of the node.
    pub jump_term: f64,
    /// `min{1, H_z/eps}^2 ||f_h^I||^2` over the patch.
    pub interior_term: f64,
    /// Max jump magnitude over the short interior star edges.
    pub jump_max_short: f64,
    /// Max jump magnitude over the remaining interior star edges.
    pub jump_max_long: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub scheme: WeightScheme,
    pub per_node: Vec<NodeEstimate>,
    pub jump_total: f64,
    pub interior_total: f64,
    pub quad_total: f64,
    /// `sqrt(jump_total + interior_total + quad_total)`.
    pub total: f64,
    /// `total / energy_error`, when an exact solution is attached.
    pub effectivity: Option<f64>,
    /// Some nodes fell outside the anisotropic/regular classification; the
    /// estimator is still well defined there, constants are not covered.
    pub has_unclassified: bool,
}

/// Weighted squared jump residual of one node patch. `jumps` holds the
/// per-edge jump magnitudes (zero on boundary edges).
pub fn jump_term(patch: &NodePatch, jumps: &[f64], epsilon: f64, scheme: WeightScheme) -> f64 {
    if patch.interior_edges.is_empty() {
        return 0.0;
    }
    let (j_short, j_long) = jump_extremes(patch, jumps);
    let j_all = j_short.max(j_long);
    let area = patch.area;
    match scheme {
        WeightScheme::NewEtaH => {
            area.min(epsilon * patch.diameter) * (epsilon * j_all).powi(2)
        }
        WeightScheme::OldEtaH2h => {
            let lambda = epsilon * patch.diameter * patch.diameter / patch.width;
            area.min(lambda) * (epsilon * j_all).powi(2)
        }
        WeightScheme::SplitShortLong => {
            area.min(epsilon * patch.width) * (epsilon * j_short).powi(2)
                + area.min(epsilon * patch.diameter) * (epsilon * j_long).powi(2)
        }
    }
}

/// Max jump magnitude over the short star edges and over the rest of the
/// interior star (exact: P1 jumps are constant per edge).
pub fn jump_extremes(patch: &NodePatch, jumps: &[f64]) -> (f64, f64) {
    let mut j_short: f64 = 0.0;
    let mut j_long: f64 = 0.0;
    for &e in &patch.interior_edges {
        if patch.short_edges.contains(&e) {
            j_short = j_short.max(jumps[e]);
        } else {
            j_long = j_long.max(jumps[e]);
        }
    }
    (j_short, j_long)
}

/// Interior residual of one node: `min{1, H_z/eps}^2 ||f_h^I||^2_{2; omega_z}`,
/// with the L2 norm of the P1 field taken exactly via element mass matrices.
pub fn interior_term(
    mesh: &Triangulation,
    patch: &NodePatch,
    f_nodes: &[f64],
    epsilon: f64,
) -> f64 {
    let weight = (patch.diameter / epsilon).min(1.0);
    let mut norm_sq = 0.0;
    for &t in &patch.triangles {
        let pts = mesh.triangle_points(t);
        let verts = mesh.triangles[t].vertices;
        let m = element_mass(pts);
        for i in 0..3 {
            for j in 0..3 {
                norm_sq += f_nodes[verts[i]] * m[i][j] * f_nodes[verts[j]];
            }
        }
    }
    weight * weight * norm_sq
}

/// Quadrature-residual term `||f_h - f_h^I||^2_{2; Omega}`.
pub fn quadrature_term(
    mesh: &Triangulation,
    u_h: &FemSolution,
    spec: &ProblemSpec,
    rule: &TriangleRule,
) -> f64 {
    reaction_interpolation_error_sq(mesh, u_h, spec, rule)
}

/// Full estimator under one weight scheme. The effectivity is filled when
/// the problem carries an exact solution.
pub fn total_estimator(
    mesh: &Triangulation,
    patches: &[NodePatch],
    u_h: &FemSolution,
    spec: &ProblemSpec,
    scheme: WeightScheme,
    rule: &TriangleRule,
) -> Result<EstimatorReport, FemError> {
    let jumps: Vec<f64> = all_edge_jumps(mesh, &u_h.nodal_values)
        .iter()
        .map(|j| j.magnitude)
        .collect();
    let f_nodes: Vec<f64> = (0..mesh.n_nodes())
        .map(|z| {
            let p = mesh.points[z];
            spec.reaction.eval(p.x, p.y, u_h.nodal_values[z])
        })
        .collect();

    let mut per_node = Vec::with_capacity(patches.len());
    let mut jump_total = 0.0;
    let mut interior_total = 0.0;
    let mut has_unclassified = false;
    for patch in patches {
        has_unclassified |= patch.class == NodeClass::Unclassified;
        let (j_short, j_long) = jump_extremes(patch, &jumps);
        let jt = jump_term(patch, &jumps, spec.epsilon, scheme);
        let it = interior_term(mesh, patch, &f_nodes, spec.epsilon);
        jump_total += jt;
        interior_total += it;
        per_node.push(NodeEstimate {
            node: patch.node,
            jump_term: jt,
            interior_term: it,
            jump_max_short: j_short,
            jump_max_long: j_long,
        });
    }
    let quad_total = quadrature_term(mesh, u_h, spec, rule);
    let total = (jump_total + interior_total + quad_total).sqrt();
    let effectivity = match &spec.exact {
        Some(_) => {
            let err = crate::fem::energy_error(mesh, u_h, spec, rule)?;
            if err > 0.0 {
                Some(total / err)
            } else {
                None
            }
        }
        None => None,
    };
    Ok(EstimatorReport {
        scheme,
        per_node,
        jump_total,
        interior_total,
        quad_total,
        total,
        effectivity,
        has_unclassified,
    })
}

/// Side-by-side jump terms under all three schemes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightComparison {
    /// Per node: (old, new, split) weighted squared jump terms.
    pub per_node: Vec<(f64, f64, f64)>,
    pub old_total: f64,
    pub new_total: f64,
    pub split_total: f64,
    /// `new_total / old_total` (0 when both vanish).
    pub ratio_new_old: f64,
    /// `split_total / new_total` (0 when both vanish).
    pub ratio_split_new: f64,
}

pub fn compare_weights(
    mesh: &Triangulation,
    patches: &[NodePatch],
    u_h: &FemSolution,
    spec: &ProblemSpec,
) -> WeightComparison {
    let jumps: Vec<f64> = all_edge_jumps(mesh, &u_h.nodal_values)
        .iter()
        .map(|j| j.magnitude)
        .collect();
    let mut per_node = Vec::with_capacity(patches.len());
    let (mut old_total, mut new_total, mut split_total) = (0.0, 0.0, 0.0);
    for patch in patches {
        let old = jump_term(patch, &jumps, spec.epsilon, WeightScheme::OldEtaH2h);
        let new = jump_term(patch, &jumps, spec.epsilon, WeightScheme::NewEtaH);
        let split = jump_term(patch, &jumps, spec.epsilon, WeightScheme::SplitShortLong);
        old_total += old;
        new_total += new;
        split_total += split;
        per_node.push((old, new, split));
    }
    let ratio = |num: f64, den: f64| if den > 0.0 { num / den } else { 0.0 };
    WeightComparison {
        per_node,
        old_total,
        new_total,
        split_total,
        ratio_new_old: ratio(new_total, old_total),
        ratio_split_new: ratio(split_total, new_total),
    }
}

/// CSV rows mirroring the per-node report; one line per node.
pub fn report_to_csv(report: &EstimatorReport, patches: &[NodePatch]) -> String {
    let mut out =
        String::from("node_id,H_z,h_z,area,class,J_ring,J_long,jump_term,interior_term\n");
    for (est, patch) in report.per_node.iter().zip(patches) {
        debug_assert_eq!(est.node, patch.node);
        out.push_str(&format!(
            "{},{:.12e},{:.12e},{:.12e},{:?},{:.12e},{:.12e},{:.12e},{:.12e}\n",
            est.node,
            patch.diameter,
            patch.width,
            patch.area,
            patch.class,
            est.jump_max_short,
            est.jump_max_long,
            est.jump_term,
            est.interior_term,
        ));
    }
    out
}
