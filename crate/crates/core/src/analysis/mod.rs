//! Numerical verification of the inequalities behind the estimator
//! weights: the per-triangle divergence identity and auxiliary trace
//! bounds, the hat-weighted scaled trace inequalities on node patches,
//! structured patch averages and their bounds, the min-quotient
//! inequality, the weighted norm `Theta`, and the error representation
//! `error <= C (I + II + E_quad)` on structured tensor meshes.
//!
//! Inequality checks return [`RatioReport`]s; thresholds are calibrated
//! once from fuzz sweeps and frozen by the acceptance suite.

pub mod fuzz;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fem::{
    all_edge_jumps, eval_p1, gradient_per_triangle, FemSolution, ProblemSpec,
};
use crate::mesh::{NodePatch, Point2, Triangulation};
use crate::quadrature::{
    integrate_edge, integrate_edge_subdivided, integrate_edge_x_strips, integrate_triangle_pts,
    integrate_triangle_subdivided, integrate_triangle_x_strips, EdgeRule, TriangleRule,
};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("degenerate triangle")]
    DegenerateTriangle,
    #[error("test function is negative on the triangle (sample {0:.3e})")]
    NegativeTestFunction(f64),
    #[error("edge {0} does not belong to the interior star of node {1}")]
    EdgeNotInPatch(usize, usize),
    #[error("degenerate support: empty hat interval")]
    DegenerateSupport,
    #[error("inputs must be strictly positive")]
    NonPositiveInput,
    #[error("energy error below 1e-12; normalized error function undefined")]
    ZeroError,
    #[error("mesh is not a tensor grid; structured averages unavailable")]
    UnstructuredMesh,
}

/// Bivariate polynomial of total degree at most 3, used as the test
/// function class for the inequality checks. Coefficient order:
/// `1, x, y, x^2, xy, y^2, x^3, x^2 y, x y^2, y^3`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TestFunction {
    pub coeffs: [f64; 10],
}

const MONOMIAL_POWERS: [(i32, i32); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

impl TestFunction {
    pub fn constant(c: f64) -> Self {
        let mut coeffs = [0.0; 10];
        coeffs[0] = c;
        Self { coeffs }
    }

    /// The monomial `x^p y^q`, `p + q <= 3`.
    pub fn monomial(p: u32, q: u32) -> Self {
        let mut coeffs = [0.0; 10];
        let idx = MONOMIAL_POWERS
            .iter()
            .position(|&(a, b)| a == p as i32 && b == q as i32)
            .expect("total degree at most 3");
        coeffs[idx] = 1.0;
        Self { coeffs }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        MONOMIAL_POWERS
            .iter()
            .zip(&self.coeffs)
            .map(|(&(p, q), &c)| c * x.powi(p) * y.powi(q))
            .sum()
    }

    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        let mut gx = 0.0;
        let mut gy = 0.0;
        for (&(p, q), &c) in MONOMIAL_POWERS.iter().zip(&self.coeffs) {
            if p > 0 {
                gx += c * p as f64 * x.powi(p - 1) * y.powi(q);
            }
            if q > 0 {
                gy += c * q as f64 * x.powi(p) * y.powi(q - 1);
            }
        }
        (gx, gy)
    }
}

/// Which branch of an inequality a sample exercised.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    ShortEdge,
    LongEdge,
    TriangleAux,
}

/// One inequality evaluation: `lhs <= C * rhs` is the claim under test.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatioReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`; 0 when both vanish.
    pub ratio: f64,
    /// `rhs = 0` with `lhs > 0`: the inequality cannot hold.
    pub degenerate: bool,
    /// Aspect ratio of the instance the sample was drawn on.
    pub aspect: f64,
    pub case_tag: CaseTag,
}

impl RatioReport {
    fn new(lhs: f64, rhs: f64, aspect: f64, case_tag: CaseTag) -> Self {
        let (ratio, degenerate) = if rhs > 0.0 {
            (lhs / rhs, false)
        } else if lhs > 0.0 {
            (f64::INFINITY, true)
        } else {
            (0.0, false)
        };
        RatioReport { lhs, rhs, ratio, degenerate, aspect, case_tag }
    }
}

// Sign-aware integral of |f| over a triangle: exact fast path when samples
// are one-signed, uniform 32x32 barycentric refinement otherwise.
const SIGN_GRID: usize = 6;
const ABS_SUBDIV: usize = 32;

fn integrate_abs_triangle(
    f: &dyn Fn(f64, f64) -> f64,
    pts: [Point2; 3],
    rule: &TriangleRule,
) -> f64 {
    let mut has_pos = false;
    let mut has_neg = false;
    let k = SIGN_GRID;
    for i in 0..=k {
        for j in 0..=(k - i) {
            let l1 = i as f64 / k as f64;
            let l2 = j as f64 / k as f64;
            let l0 = 1.0 - l1 - l2;
            let x = l0 * pts[0].x + l1 * pts[1].x + l2 * pts[2].x;
            let y = l0 * pts[0].y + l1 * pts[1].y + l2 * pts[2].y;
            let v = f(x, y);
            has_pos |= v > 0.0;
            has_neg |= v < 0.0;
        }
    }
    if has_pos && has_neg {
        integrate_triangle_subdivided(&mut |x, y| f(x, y).abs(), pts, rule, ABS_SUBDIV)
    } else if has_neg {
        -integrate_triangle_pts(&mut |x, y| f(x, y), pts, rule)
    } else {
        integrate_triangle_pts(&mut |x, y| f(x, y), pts, rule)
    }
}

fn integrate_abs_edge(
    f: &dyn Fn(f64, f64) -> f64,
    a: Point2,
    b: Point2,
    rule: &EdgeRule,
) -> f64 {
    let mut has_pos = false;
    let mut has_neg = false;
    for i in 0..=8 {
        let t = i as f64 / 8.0;
        let v = f(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
        has_pos |= v > 0.0;
        has_neg |= v < 0.0;
    }
    if has_pos && has_neg {
        integrate_edge_subdivided(|x, y| f(x, y).abs(), a, b, rule, 64)
    } else {
        integrate_edge(f, a, b, rule).abs()
    }
}

/// Roles of the triangle corners in the per-triangle trace bounds: `z` is the
/// vertex, the edge `s_prime` joins `z` to `z''` (it is opposite `z'`) and
/// `s_dprime` joins `z` to `z'`.
struct TriangleRoles {
    z: Point2,
    z_prime: Point2,
    z_dprime: Point2,
    /// Unit vector along the edge (z', z), directed from z' to z.
    mu_dprime: (f64, f64),
    /// sin of the angle at z between the edges (z, z'') and (z, z').
    sin_angle: f64,
    len_s: f64,
    len_s_prime: f64,
    len_s_dprime: f64,
    area: f64,
}

fn triangle_roles(pts: [Point2; 3], z_local: usize) -> Result<TriangleRoles, AnalysisError> {
    let z = pts[z_local];
    let z_prime = pts[(z_local + 1) % 3];
    let z_dprime = pts[(z_local + 2) % 3];
    let area = 0.5 * crate::mesh::signed_area2(pts[0], pts[1], pts[2]).abs();
    let len_s = z_prime.dist(z_dprime);
    let len_s_prime = z.dist(z_dprime);
    let len_s_dprime = z.dist(z_prime);
    if area <= 0.0 || len_s_prime == 0.0 || len_s_dprime == 0.0 {
        return Err(AnalysisError::DegenerateTriangle);
    }
    let mu_dprime = (
        (z.x - z_prime.x) / len_s_dprime,
        (z.y - z_prime.y) / len_s_dprime,
    );
    let u = (z_dprime.x - z.x, z_dprime.y - z.y);
    let v = (z_prime.x - z.x, z_prime.y - z.y);
    let cross = (u.0 * v.1 - u.1 * v.0).abs();
    let sin_angle = cross / (len_s_prime * len_s_dprime);
    Ok(TriangleRoles {
        z,
        z_prime,
        z_dprime,
        mu_dprime,
        sin_angle,
        len_s,
        len_s_prime,
        len_s_dprime,
        area,
    })
}

/// Hat function of the vertex `z` inside the triangle, by barycentric
/// coordinates.
fn hat_at(pts: [Point2; 3], z_local: usize, x: f64, y: f64) -> f64 {
    crate::fem::barycentric(pts, Point2::new(x, y))[z_local]
}

/// Both sides of the divergence identity
/// `sin(angle(S', S'')) int_{S'} v phi_z = int_T (phi_z grad v . mu'' + v / |S''|)`;
/// they agree to rounding for polynomial `v`.
pub fn divergence_identity(
    pts: [Point2; 3],
    z_local: usize,
    v: &TestFunction,
) -> Result<(f64, f64), AnalysisError> {
    let roles = triangle_roles(pts, z_local)?;
    let erule = EdgeRule::gauss(6);
    let trule = TriangleRule::with_degree(6);
    // phi_z decays 1 -> 0 from z to z'' along S'
    let lhs = roles.sin_angle
        * integrate_edge(
            |x, y| {
                let t = Point2::new(x, y).dist(roles.z) / roles.len_s_prime;
                v.eval(x, y) * (1.0 - t)
            },
            roles.z,
            roles.z_dprime,
            &erule,
        );
    let rhs = integrate_triangle_pts(
        &mut |x, y| {
            let g = v.grad(x, y);
            hat_at(pts, z_local, x, y) * (g.0 * roles.mu_dprime.0 + g.1 * roles.mu_dprime.1)
                + v.eval(x, y) / roles.len_s_dprime
        },
        pts,
        &trule,
    );
    Ok((lhs, rhs))
}

/// Residual `|LHS - RHS|` of the divergence identity.
pub fn divergence_identity_residual(
    pts: [Point2; 3],
    z_local: usize,
    v: &TestFunction,
) -> Result<f64, AnalysisError> {
    let (lhs, rhs) = divergence_identity(pts, z_local, v)?;
    Ok((lhs - rhs).abs())
}

fn require_nonnegative(
    pts: [Point2; 3],
    v: &TestFunction,
) -> Result<(), AnalysisError> {
    let k = 10;
    let mut min_v: f64 = f64::INFINITY;
    let mut max_v: f64 = f64::NEG_INFINITY;
    for i in 0..=k {
        for j in 0..=(k - i) {
            let l1 = i as f64 / k as f64;
            let l2 = j as f64 / k as f64;
            let l0 = 1.0 - l1 - l2;
            let x = l0 * pts[0].x + l1 * pts[1].x + l2 * pts[2].x;
            let y = l0 * pts[0].y + l1 * pts[1].y + l2 * pts[2].y;
            let val = v.eval(x, y);
            min_v = min_v.min(val);
            max_v = max_v.max(val);
        }
    }
    if min_v < -1e-12 * max_v.abs().max(1.0) {
        return Err(AnalysisError::NegativeTestFunction(min_v));
    }
    Ok(())
}

/// First auxiliary triangle bound, for `v >= 0`:
/// `sin(angle(S',S'')) ||v phi_z||_{1;S'} <= ||grad v||_{1;T} + ||v||_{1;T} / |S''|`.
pub fn check_aux_a(
    pts: [Point2; 3],
    z_local: usize,
    v: &TestFunction,
) -> Result<RatioReport, AnalysisError> {
    require_nonnegative(pts, v)?;
    let roles = triangle_roles(pts, z_local)?;
    let erule = EdgeRule::gauss(6);
    let trule = TriangleRule::with_degree(6);
    let lhs = roles.sin_angle
        * integrate_abs_edge(
            &|x, y| {
                let t = Point2::new(x, y).dist(roles.z) / roles.len_s_prime;
                v.eval(x, y) * (1.0 - t)
            },
            roles.z,
            roles.z_dprime,
            &erule,
        );
    let grad_l1 = integrate_triangle_subdivided(
        &mut |x, y| {
            let g = v.grad(x, y);
            g.0.hypot(g.1)
        },
        pts,
        &trule,
        8,
    );
    let v_l1 = integrate_abs_triangle(&|x, y| v.eval(x, y), pts, &trule);
    let rhs = grad_l1 + v_l1 / roles.len_s_dprime;
    let geom = crate::mesh::TriangleGeometry::from_points(pts[0], pts[1], pts[2])
        .ok_or(AnalysisError::DegenerateTriangle)?;
    Ok(RatioReport::new(lhs, rhs, geom.aspect(), CaseTag::TriangleAux))
}

/// Second auxiliary triangle bound, for `v >= 0`:
/// `||v phi_z||_{1;S'} / |S'| <= ||v phi_z||_{1;S''} / |S''| + |S| ||grad v||_{1;T} / |T|`.
pub fn check_aux_b(
    pts: [Point2; 3],
    z_local: usize,
    v: &TestFunction,
) -> Result<RatioReport, AnalysisError> {
    require_nonnegative(pts, v)?;
    let roles = triangle_roles(pts, z_local)?;
    let erule = EdgeRule::gauss(6);
    let trule = TriangleRule::with_degree(6);
    let hat_edge_integral = |far: Point2, len: f64| {
        integrate_abs_edge(
            &|x, y| {
                let t = Point2::new(x, y).dist(roles.z) / len;
                v.eval(x, y) * (1.0 - t)
            },
            roles.z,
            far,
            &erule,
        )
    };
    let lhs = hat_edge_integral(roles.z_dprime, roles.len_s_prime) / roles.len_s_prime;
    let other = hat_edge_integral(roles.z_prime, roles.len_s_dprime) / roles.len_s_dprime;
    let grad_l1 = integrate_triangle_subdivided(
        &mut |x, y| {
            let g = v.grad(x, y);
            g.0.hypot(g.1)
        },
        pts,
        &trule,
        8,
    );
    let rhs = other + roles.len_s * grad_l1 / roles.area;
    let geom = crate::mesh::TriangleGeometry::from_points(pts[0], pts[1], pts[2])
        .ok_or(AnalysisError::DegenerateTriangle)?;
    Ok(RatioReport::new(lhs, rhs, geom.aspect(), CaseTag::TriangleAux))
}

fn patch_l1_norms(
    mesh: &Triangulation,
    patch: &NodePatch,
    v: &TestFunction,
    rule: &TriangleRule,
) -> (f64, f64) {
    let mut v_l1 = 0.0;
    let mut grad_l1 = 0.0;
    for &t in &patch.triangles {
        let pts = mesh.triangle_points(t);
        v_l1 += integrate_abs_triangle(&|x, y| v.eval(x, y), pts, rule);
        grad_l1 += integrate_triangle_subdivided(
            &mut |x, y| {
                let g = v.grad(x, y);
                g.0.hypot(g.1)
            },
            pts,
            rule,
            8,
        );
    }
    (v_l1, grad_l1)
}

fn patch_l2_norms(
    mesh: &Triangulation,
    patch: &NodePatch,
    v: &TestFunction,
    rule: &TriangleRule,
) -> (f64, f64) {
    let mut v_sq = 0.0;
    let mut grad_sq = 0.0;
    for &t in &patch.triangles {
        let pts = mesh.triangle_points(t);
        v_sq += integrate_triangle_pts(&mut |x, y| v.eval(x, y).powi(2), pts, rule);
        grad_sq += integrate_triangle_pts(
            &mut |x, y| {
                let g = v.grad(x, y);
                g.0 * g.0 + g.1 * g.1
            },
            pts,
            rule,
        );
    }
    (v_sq.max(0.0).sqrt(), grad_sq.max(0.0).sqrt())
}

fn trace_edge_case(patch: &NodePatch, edge: usize) -> Result<(CaseTag, f64), AnalysisError> {
    if !patch.interior_edges.contains(&edge) {
        return Err(AnalysisError::EdgeNotInPatch(edge, patch.node));
    }
    // the short-edge branch carries weight 1/H_z, the long-edge one 1/h_z
    if patch.short_edges.contains(&edge) {
        Ok((CaseTag::ShortEdge, 1.0 / patch.diameter))
    } else {
        Ok((CaseTag::LongEdge, 1.0 / patch.width))
    }
}

fn hat_edge_abs_integral(
    mesh: &Triangulation,
    patch: &NodePatch,
    edge: usize,
    v: &TestFunction,
    rule: &EdgeRule,
) -> f64 {
    let [a, b] = mesh.edges[edge].nodes;
    let z = patch.node;
    let (from, to) = if a == z { (a, b) } else { (b, a) };
    let (pa, pb) = (mesh.points[from], mesh.points[to]);
    let len = mesh.edges[edge].length;
    integrate_abs_edge(
        &|x, y| {
            let t = Point2::new(x, y).dist(pa) / len;
            v.eval(x, y) * (1.0 - t)
        },
        pa,
        pb,
        rule,
    )
}

/// Hat-weighted scaled trace inequality in L1:
/// `||v phi_z||_{1;S} <= C ( ||grad v||_{1;omega_z} + w ||v||_{1;omega_z} )`
/// with `w = 1/H_z` on short star edges and `1/h_z` on long ones.
pub fn check_scaled_trace_l1(
    mesh: &Triangulation,
    patch: &NodePatch,
    v: &TestFunction,
    edge: usize,
) -> Result<RatioReport, AnalysisError> {
    let (tag, weight) = trace_edge_case(patch, edge)?;
    let erule = EdgeRule::gauss(6);
    let trule = TriangleRule::with_degree(6);
    let lhs = hat_edge_abs_integral(mesh, patch, edge, v, &erule);
    let (v_l1, grad_l1) = patch_l1_norms(mesh, patch, v, &trule);
    let rhs = grad_l1 + weight * v_l1;
    Ok(RatioReport::new(lhs, rhs, patch.aspect(), tag))
}

/// Squared companion of the scaled trace inequality:
/// `||v phi_z||^2_{1;S} / |S| <= C ( ||v||_2 ||grad v||_2 + w ||v||_2^2 )`
/// over the patch, with the same branch weights.
pub fn check_scaled_trace_sq(
    mesh: &Triangulation,
    patch: &NodePatch,
    v: &TestFunction,
    edge: usize,
) -> Result<RatioReport, AnalysisError> {
    let (tag, weight) = trace_edge_case(patch, edge)?;
    let erule = EdgeRule::gauss(6);
    let trule = TriangleRule::with_degree(6);
    let edge_int = hat_edge_abs_integral(mesh, patch, edge, v, &erule);
    let lhs = edge_int * edge_int / mesh.edges[edge].length;
    let (v_l2, grad_l2) = patch_l2_norms(mesh, patch, v, &trule);
    let rhs = v_l2 * grad_l2 + weight * v_l2 * v_l2;
    Ok(RatioReport::new(lhs, rhs, patch.aspect(), tag))
}

/// Hat-weighted 1-D average: the unique `gbar` with
/// `int (g(x) - gbar) phi_i(x) dx = 0` over `(x_minus, x_plus)`, where
/// `phi_i` is the 1-D hat peaking at `x_center`. Forced to zero at
/// boundary nodes.
pub fn compute_gbar_struct(
    g_line: &dyn Fn(f64) -> f64,
    x_minus: f64,
    x_center: f64,
    x_plus: f64,
    boundary: bool,
    x_breaks: Option<&[f64]>,
) -> Result<f64, AnalysisError> {
    if !(x_minus <= x_center && x_center <= x_plus) || x_minus == x_plus {
        return Err(AnalysisError::DegenerateSupport);
    }
    if boundary {
        return Ok(0.0);
    }
    let rule = EdgeRule::gauss(6);
    let integrate_half = |a: f64, b: f64, rising: bool| -> f64 {
        if b <= a {
            return 0.0;
        }
        let hat = move |x: f64| {
            if rising {
                (x - a) / (b - a)
            } else {
                (b - x) / (b - a)
            }
        };
        match x_breaks {
            Some(breaks) => integrate_edge_x_strips(
                |x, _| g_line(x) * hat(x),
                Point2::new(a, 0.0),
                Point2::new(b, 0.0),
                &rule,
                breaks,
            ),
            None => integrate_edge(
                |x, _| g_line(x) * hat(x),
                Point2::new(a, 0.0),
                Point2::new(b, 0.0),
                &rule,
            ),
        }
    };
    let numerator =
        integrate_half(x_minus, x_center, true) + integrate_half(x_center, x_plus, false);
    let denominator = 0.5 * (x_plus - x_minus);
    Ok(numerator / denominator)
}

/// Record of the structured patch average and the two bounds it satisfies.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GbarRecord {
    pub node: usize,
    pub gbar: f64,
    /// `H_z |gbar|` vs `||grad g||_{1;rect} + ||g||_{1;rect} / h_z`.
    pub l1_lhs: f64,
    pub l1_rhs: f64,
    /// `H_z gbar^2` vs `||g||_2 (||grad g||_2 + ||g||_2 / h_z)` on the rect.
    pub sq_lhs: f64,
    pub sq_rhs: f64,
}

/// Evaluates the average `gbar` of `g(., y_z)` and both bounds over the
/// enclosing rectangle `(x0, x1) x (y0, y1)` of the structured patch.
pub fn check_gbar_bounds(
    mesh: &Triangulation,
    patch: &NodePatch,
    rect: (f64, f64, f64, f64),
    g: &dyn Fn(f64, f64) -> f64,
    grad_g: &dyn Fn(f64, f64) -> (f64, f64),
) -> Result<GbarRecord, AnalysisError> {
    let z = patch.node;
    let pz = mesh.points[z];
    let (x0, x1, y0, y1) = rect;
    let boundary = mesh.is_boundary_node(z);
    let gbar = compute_gbar_struct(&|x| g(x, pz.y), x0, pz.x, x1, boundary, None)?;

    // rectangle integrals by an 8x8 tensor Gauss grid via two triangles
    let trule = TriangleRule::with_degree(6);
    let pts_lo = [
        Point2::new(x0, y0),
        Point2::new(x1, y0),
        Point2::new(x1, y1),
    ];
    let pts_hi = [
        Point2::new(x0, y0),
        Point2::new(x1, y1),
        Point2::new(x0, y1),
    ];
    let abs_int = |f: &dyn Fn(f64, f64) -> f64| {
        integrate_abs_triangle(f, pts_lo, &trule) + integrate_abs_triangle(f, pts_hi, &trule)
    };
    let sq_int = |f: &dyn Fn(f64, f64) -> f64| {
        integrate_triangle_pts(&mut |x, y| f(x, y).powi(2), pts_lo, &trule)
            + integrate_triangle_pts(&mut |x, y| f(x, y).powi(2), pts_hi, &trule)
    };
    let g_l1 = abs_int(&|x, y| g(x, y));
    let grad_l1 = abs_int(&|x, y| {
        let d = grad_g(x, y);
        d.0.hypot(d.1)
    });
    let g_l2 = sq_int(&|x, y| g(x, y)).max(0.0).sqrt();
    let grad_l2 = sq_int(&|x, y| {
        let d = grad_g(x, y);
        d.0.hypot(d.1)
    })
    .max(0.0)
    .sqrt();

    Ok(GbarRecord {
        node: z,
        gbar,
        l1_lhs: patch.diameter * gbar.abs(),
        l1_rhs: grad_l1 + g_l1 / patch.width,
        sq_lhs: patch.diameter * gbar * gbar,
        sq_rhs: g_l2 * (grad_l2 + g_l2 / patch.width),
    })
}

/// The min-quotient inequality `min{a a', b b'} / min{a', b'} <= a + b`
/// for strictly positive inputs.
pub fn check_min_inequality(
    a: f64,
    a_prime: f64,
    b: f64,
    b_prime: f64,
) -> Result<(f64, f64, bool), AnalysisError> {
    if !(a > 0.0 && a_prime > 0.0 && b > 0.0 && b_prime > 0.0) {
        return Err(AnalysisError::NonPositiveInput);
    }
    let lhs = (a * a_prime).min(b * b_prime) / a_prime.min(b_prime);
    let rhs = a + b;
    Ok((lhs, rhs, lhs <= rhs + 1e-15 * rhs))
}

/// Field argument for [`compute_theta`]: a P1 nodal vector or an analytic
/// function with gradient.
pub enum ThetaField<'a> {
    P1(&'a [f64]),
    Analytic {
        f: &'a dyn Fn(f64, f64) -> f64,
        grad: &'a dyn Fn(f64, f64) -> (f64, f64),
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ThetaRecord {
    pub theta: f64,
    /// `eps^2 ||grad g||^2` over the domain.
    pub gradient_part: f64,
    /// `sum_z (1 + eps^2 / H_z^2) ||g||^2_{omega_z}` (patches overlap).
    pub patch_part: f64,
}

/// Weighted norm `Theta = eps^2 ||grad g||^2 + sum_z (1 + eps^2 H_z^-2) ||g||^2_{omega_z}`.
pub fn compute_theta(
    mesh: &Triangulation,
    patches: &[NodePatch],
    epsilon: f64,
    field: ThetaField,
    rule: &TriangleRule,
) -> ThetaRecord {
    let e2 = epsilon * epsilon;
    // per-triangle squared L2 norms and the global gradient part
    let n_tri = mesh.triangles.len();
    let mut tri_l2_sq = vec![0.0; n_tri];
    let mut grad_sq = 0.0;
    match field {
        ThetaField::P1(nodal) => {
            let grads = gradient_per_triangle(mesh, nodal);
            for t in 0..n_tri {
                let pts = mesh.triangle_points(t);
                let verts = mesh.triangles[t].vertices;
                let m = crate::fem::element_mass(pts);
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        s += nodal[verts[i]] * m[i][j] * nodal[verts[j]];
                    }
                }
                tri_l2_sq[t] = s;
                let area = 0.5
                    * crate::mesh::signed_area2(pts[0], pts[1], pts[2]).abs();
                grad_sq += area * (grads[t].0 * grads[t].0 + grads[t].1 * grads[t].1);
            }
        }
        ThetaField::Analytic { f, grad } => {
            for t in 0..n_tri {
                let pts = mesh.triangle_points(t);
                tri_l2_sq[t] =
                    integrate_triangle_pts(&mut |x, y| f(x, y).powi(2), pts, rule);
                grad_sq += integrate_triangle_pts(
                    &mut |x, y| {
                        let d = grad(x, y);
                        d.0 * d.0 + d.1 * d.1
                    },
                    pts,
                    rule,
                );
            }
        }
    }
    let gradient_part = e2 * grad_sq;
    let mut patch_part = 0.0;
    for patch in patches {
        let norm_sq: f64 = patch.triangles.iter().map(|&t| tri_l2_sq[t]).sum();
        patch_part += (1.0 + e2 / (patch.diameter * patch.diameter)) * norm_sq;
    }
    ThetaRecord { theta: gradient_part + patch_part, gradient_part, patch_part }
}

/// Tensor-grid view of a structured mesh: sorted coordinate lines and the
/// node id at each `(i, j)` grid position.
pub struct TensorGrid {
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub node_at: Vec<Vec<usize>>,
    pub x_index: Vec<usize>,
    pub y_index: Vec<usize>,
}

/// Recognizes a tensor-product node layout (exact coordinate matches).
pub fn tensor_grid(mesh: &Triangulation) -> Result<TensorGrid, AnalysisError> {
    let mut xs: Vec<f64> = mesh.points.iter().map(|p| p.x).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    let mut ys: Vec<f64> = mesh.points.iter().map(|p| p.y).collect();
    ys.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ys.dedup();
    if xs.len() * ys.len() != mesh.n_nodes() {
        return Err(AnalysisError::UnstructuredMesh);
    }
    let mut node_at = vec![vec![usize::MAX; xs.len()]; ys.len()];
    let mut x_index = vec![0usize; mesh.n_nodes()];
    let mut y_index = vec![0usize; mesh.n_nodes()];
    for (z, p) in mesh.points.iter().enumerate() {
        let i = xs.binary_search_by(|v| v.partial_cmp(&p.x).unwrap());
        let j = ys.binary_search_by(|v| v.partial_cmp(&p.y).unwrap());
        match (i, j) {
            (Ok(i), Ok(j)) => {
                node_at[j][i] = z;
                x_index[z] = i;
                y_index[z] = j;
            }
            _ => return Err(AnalysisError::UnstructuredMesh),
        }
    }
    if node_at.iter().flatten().any(|&z| z == usize::MAX) {
        return Err(AnalysisError::UnstructuredMesh);
    }
    Ok(TensorGrid { xs, ys, node_at, x_index, y_index })
}

impl TensorGrid {
    /// Piecewise-linear evaluation of a nodal field along the mesh row
    /// `y = ys[j]`.
    fn eval_row(&self, nodal: &[f64], j: usize, x: f64) -> f64 {
        let xs = &self.xs;
        let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => return nodal[self.node_at[j][i]],
            Err(i) => i.clamp(1, xs.len() - 1),
        };
        let (x0, x1) = (xs[i - 1], xs[i]);
        let t = (x - x0) / (x1 - x0);
        let (v0, v1) = (nodal[self.node_at[j][i - 1]], nodal[self.node_at[j][i]]);
        v0 + t * (v1 - v0)
    }
}

/// Decomposition of the error representation on a structured tensor mesh.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErrorRepresentationRecord {
    /// Jump part: `sum_z eps^2 int_{gamma_z} (g - gbar_z) phi_z [grad u_h] . nu`.
    pub i_term: f64,
    /// Interior part: `sum_z int_{omega_z} f_h^I (g - gbar_z) phi_z`.
    pub ii_term: f64,
    /// `|< f_h - f_h^I, G >|`.
    pub e_quad: f64,
    pub error: f64,
    /// `error / (|I| + |II| + E_quad)`.
    pub ratio: f64,
}

/// Evaluates the error representation with `G = (u_h - u)/|||u_h - u|||`,
/// `G_h` its nodal interpolant, `g = G - G_h`, and the structured averages
/// `gbar_z` from the 1-D hat identity (zero at boundary nodes).
pub fn verify_error_representation(
    mesh: &Triangulation,
    u_h: &FemSolution,
    spec: &ProblemSpec,
) -> Result<ErrorRepresentationRecord, AnalysisError> {
    let exact = spec
        .exact
        .as_ref()
        .ok_or(AnalysisError::ZeroError)?;
    let grid = tensor_grid(mesh)?;
    let rule = TriangleRule::with_degree(6);
    let erule = EdgeRule::gauss(6);
    let breaks = exact.x_breaks.clone().unwrap_or_default();

    let error = crate::fem::energy_error(mesh, u_h, spec, &rule)
        .map_err(|_| AnalysisError::ZeroError)?;
    if error < 1e-12 {
        return Err(AnalysisError::ZeroError);
    }

    // G at the nodes, g = G - G_h vanishes at nodes by construction
    let g_nodes: Vec<f64> = (0..mesh.n_nodes())
        .map(|z| {
            let p = mesh.points[z];
            (u_h.nodal_values[z] - (exact.u)(p.x, p.y)) / error
        })
        .collect();
    let f_nodes: Vec<f64> = (0..mesh.n_nodes())
        .map(|z| {
            let p = mesh.points[z];
            spec.reaction.eval(p.x, p.y, u_h.nodal_values[z])
        })
        .collect();

    // g evaluated inside triangle t
    let g_in_tri = |t: usize, x: f64, y: f64| -> f64 {
        let big_g = (eval_p1(mesh, &u_h.nodal_values, t, x, y) - (exact.u)(x, y)) / error;
        big_g - eval_p1(mesh, &g_nodes, t, x, y)
    };

    // structured averages per node
    let mut gbar = vec![0.0; mesh.n_nodes()];
    for z in 0..mesh.n_nodes() {
        if mesh.is_boundary_node(z) {
            continue;
        }
        let (i, j) = (grid.x_index[z], grid.y_index[z]);
        let xm = grid.xs[i.saturating_sub(1)];
        let xp = grid.xs[(i + 1).min(grid.xs.len() - 1)];
        let y_z = grid.ys[j];
        let g_line = |x: f64| -> f64 {
            let u_h_line = grid.eval_row(&u_h.nodal_values, j, x);
            let g_h_line = grid.eval_row(&g_nodes, j, x);
            (u_h_line - (exact.u)(x, y_z)) / error - g_h_line
        };
        gbar[z] = compute_gbar_struct(
            &g_line,
            xm,
            grid.xs[i],
            xp,
            false,
            if breaks.is_empty() { None } else { Some(&breaks) },
        )?;
    }

    // I: loop interior edges; only the two endpoint hats are nonzero on S
    let jumps = all_edge_jumps(mesh, &u_h.nodal_values);
    let e2 = spec.epsilon * spec.epsilon;
    let mut i_term = 0.0;
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.is_boundary {
            continue;
        }
        // g restricted to the edge: u_h and G_h are linear along it
        let t_owner = edge.triangles[0];
        for &z in &edge.nodes {
            let [a, b] = edge.nodes;
            let (from, to) = if a == z { (a, b) } else { (b, a) };
            let (pa, pb) = (mesh.points[from], mesh.points[to]);
            let len = edge.length;
            let integral = integrate_edge_x_strips(
                |x, y| {
                    let t = Point2::new(x, y).dist(pa) / len;
                    (g_in_tri(t_owner, x, y) - gbar[z]) * (1.0 - t)
                },
                pa,
                pb,
                &erule,
                &breaks,
            );
            i_term += e2 * integral * jumps[e].jump_value;
        }
    }

    // II: loop triangles; the three vertex hats cover every patch term
    let mut ii_term = 0.0;
    let mut e_quad = 0.0;
    for t in 0..mesh.triangles.len() {
        let pts = mesh.triangle_points(t);
        let verts = mesh.triangles[t].vertices;
        for local in 0..3 {
            let z = verts[local];
            let mut integrand = |x: f64, y: f64| {
                let fhi = eval_p1(mesh, &f_nodes, t, x, y);
                fhi * (g_in_tri(t, x, y) - gbar[z]) * hat_at(pts, local, x, y)
            };
            ii_term += integrate_triangle_x_strips(&mut integrand, pts, &rule, &breaks);
        }
        let mut quad_integrand = |x: f64, y: f64| {
            let uh = eval_p1(mesh, &u_h.nodal_values, t, x, y);
            let fh = spec.reaction.eval(x, y, uh);
            let fhi = eval_p1(mesh, &f_nodes, t, x, y);
            let big_g = (uh - (exact.u)(x, y)) / error;
            (fh - fhi) * big_g
        };
        e_quad += integrate_triangle_x_strips(&mut quad_integrand, pts, &rule, &breaks);
    }
    let e_quad = e_quad.abs();

    let denom = i_term.abs() + ii_term.abs() + e_quad;
    Ok(ErrorRepresentationRecord {
        i_term,
        ii_term,
        e_quad,
        error,
        ratio: error / denom,
    })
}

#[cfg(test)]
mod tests;
