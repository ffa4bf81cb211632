//! P1 Galerkin discretization of `-eps^2 laplace(u) + f(x,y;u) = 0` with
//! homogeneous Dirichlet data: assembly, linear and damped-Newton solves,
//! interpolants, per-triangle gradients, normal-derivative jumps across
//! edges, and energy norms/errors.
//!
//! The discrete scheme replaces the reaction by the piecewise-linear
//! interpolant of `f(.; u_h)`, so the reaction inner product is exactly
//! `M w` with `w_z = f(z; u_h(z))`.

pub mod linalg;
mod manufactured;

pub use manufactured::{manufactured_layer1d, manufactured_sinsin};

use thiserror::Error;

use crate::mesh::{signed_area2, Point2, Triangulation};
use crate::quadrature::{
    integrate_triangle_pts, integrate_triangle_x_strips, EdgeRule, TriangleRule,
};
use linalg::{solve_sparse, Csr, LinalgError};

#[derive(Debug, Error)]
pub enum FemError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("linear solver failed: {0}")]
    SolverFailure(#[from] LinalgError),
    #[error("Newton did not converge within {max_iter} iterations (residual {residual:.3e})")]
    NewtonDivergence { max_iter: usize, residual: f64 },
    #[error("problem has no exact solution attached")]
    MissingExactSolution,
    #[error("edge {0} is a boundary edge")]
    BoundaryEdge(usize),
}

pub type ScalarFn = dyn Fn(f64, f64) -> f64 + Send + Sync;
pub type SemilinearFn = dyn Fn(f64, f64, f64) -> f64 + Send + Sync;
pub type GradFn = dyn Fn(f64, f64) -> (f64, f64) + Send + Sync;

/// Reaction term `f(x, y; u)`.
pub enum Reaction {
    /// `f = c(x,y) u - rhs(x,y)` with `c >= 0`.
    Linear {
        c: Box<ScalarFn>,
        rhs: Box<ScalarFn>,
    },
    /// General semilinear reaction with optional analytic `df/du`.
    Semilinear {
        f: Box<SemilinearFn>,
        df_du: Option<Box<SemilinearFn>>,
    },
}

impl Reaction {
    pub fn linear_const_c(c: f64, rhs: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Reaction::Linear {
            c: Box::new(move |_, _| c),
            rhs: Box::new(rhs),
        }
    }

    pub fn eval(&self, x: f64, y: f64, u: f64) -> f64 {
        match self {
            Reaction::Linear { c, rhs } => c(x, y) * u - rhs(x, y),
            Reaction::Semilinear { f, .. } => f(x, y, u),
        }
    }

    /// `df/du`, falling back to a central difference with step
    /// `1e-7 * (1 + |u|)`.
    pub fn eval_du(&self, x: f64, y: f64, u: f64) -> f64 {
        match self {
            Reaction::Linear { c, .. } => c(x, y),
            Reaction::Semilinear { f, df_du } => match df_du {
                Some(d) => d(x, y, u),
                None => {
                    let h = 1e-7 * (1.0 + u.abs());
                    (f(x, y, u + h) - f(x, y, u - h)) / (2.0 * h)
                }
            },
        }
    }
}

/// Manufactured exact solution with analytic gradient; `laplacian` enables
/// matched right-hand sides, `x_breaks` marks boundary-layer scales that
/// error quadrature must resolve.
pub struct ExactSolution {
    pub u: Box<ScalarFn>,
    pub grad: Box<GradFn>,
    pub laplacian: Option<Box<ScalarFn>>,
    /// Closed-form squared energy norm of `u` over the unit square, if known.
    pub energy_sq: Option<f64>,
    /// Vertical refinement lines for layer-resolving quadrature.
    pub x_breaks: Option<Vec<f64>>,
}

/// Problem data for `-eps^2 laplace(u) + f(x,y;u) = 0`, `u = 0` on the boundary.
pub struct ProblemSpec {
    pub epsilon: f64,
    pub reaction: Reaction,
    /// One-sided Lipschitz constant of the reaction, `>= 0`.
    pub c_f: f64,
    pub exact: Option<ExactSolution>,
}

impl ProblemSpec {
    /// Validates `0 < eps <= 1`, `c_f >= 0` and the normalization
    /// `c_f + eps^2 >= 1`.
    pub fn new(epsilon: f64, reaction: Reaction, c_f: f64) -> Result<Self, FemError> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(FemError::InvalidProblem("epsilon must lie in (0, 1]".into()));
        }
        if c_f.is_nan() || c_f < 0.0 {
            return Err(FemError::InvalidProblem("c_f must be >= 0".into()));
        }
        if c_f + epsilon * epsilon < 1.0 {
            return Err(FemError::InvalidProblem(
                "normalization c_f + eps^2 >= 1 violated".into(),
            ));
        }
        Ok(Self { epsilon, reaction, c_f, exact: None })
    }

    pub fn with_exact(mut self, exact: ExactSolution) -> Self {
        self.exact = Some(exact);
        self
    }
}

/// Nodal P1 coefficients; zero at every boundary node.
#[derive(Clone, Debug)]
pub struct FemSolution {
    pub nodal_values: Vec<f64>,
    /// Infinity norm of the discrete residual at the free nodes.
    pub residual_inf: f64,
    pub newton_iterations: usize,
}

impl FemSolution {
    pub fn from_values(nodal_values: Vec<f64>) -> Self {
        Self { nodal_values, residual_inf: f64::NAN, newton_iterations: 0 }
    }
}

/// Full stiffness and mass matrices over all nodes, plus the free-node set;
/// the solvers eliminate boundary rows and columns.
pub struct SparseSystem {
    pub stiffness: Csr,
    pub mass: Csr,
    pub free_nodes: Vec<usize>,
}

/// Exact P1 element stiffness matrix (hat gradients are constant).
pub fn element_stiffness(pts: [Point2; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * signed_area2(pts[0], pts[1], pts[2]).abs();
    let grads = p1_gradients(pts);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area * (grads[i].0 * grads[j].0 + grads[i].1 * grads[j].1);
        }
    }
    k
}

/// Exact P1 element mass matrix: `|T|/12 * (1 + delta_ij)`.
pub fn element_mass(pts: [Point2; 3]) -> [[f64; 3]; 3] {
    let area = 0.5 * signed_area2(pts[0], pts[1], pts[2]).abs();
    let mut m = [[area / 12.0; 3]; 3];
    for i in 0..3 {
        m[i][i] = area / 6.0;
    }
    m
}

/// Constant gradients of the three hat functions on the triangle.
pub fn p1_gradients(pts: [Point2; 3]) -> [(f64, f64); 3] {
    let area2 = signed_area2(pts[0], pts[1], pts[2]);
    let mut g = [(0.0, 0.0); 3];
    for i in 0..3 {
        let a = pts[(i + 1) % 3];
        let b = pts[(i + 2) % 3];
        g[i] = ((a.y - b.y) / area2, (b.x - a.x) / area2);
    }
    g
}

/// Assembles full stiffness and mass matrices (no boundary elimination).
pub fn assemble(mesh: &Triangulation) -> SparseSystem {
    let n = mesh.n_nodes();
    let mut at = Vec::with_capacity(9 * mesh.triangles.len());
    let mut mt = Vec::with_capacity(9 * mesh.triangles.len());
    for t in 0..mesh.triangles.len() {
        let pts = mesh.triangle_points(t);
        let verts = mesh.triangles[t].vertices;
        let k = element_stiffness(pts);
        let m = element_mass(pts);
        for i in 0..3 {
            for j in 0..3 {
                at.push((verts[i], verts[j], k[i][j]));
                mt.push((verts[i], verts[j], m[i][j]));
            }
        }
    }
    let stiffness = Csr::from_triplets(n, &mut at);
    let mass = Csr::from_triplets(n, &mut mt);
    let free_nodes = (0..n).filter(|&z| !mesh.is_boundary_node(z)).collect();
    SparseSystem { stiffness, mass, free_nodes }
}

/// Nodal interpolant of a scalar field.
pub fn interpolate_nodal(g: impl Fn(f64, f64) -> f64, mesh: &Triangulation) -> Vec<f64> {
    mesh.points.iter().map(|p| g(p.x, p.y)).collect()
}

fn residual_inf_norm(
    mesh: &Triangulation,
    sys: &SparseSystem,
    spec: &ProblemSpec,
    u: &[f64],
) -> f64 {
    let n = mesh.n_nodes();
    let w: Vec<f64> = (0..n)
        .map(|z| {
            let p = mesh.points[z];
            spec.reaction.eval(p.x, p.y, u[z])
        })
        .collect();
    let mut au = vec![0.0; n];
    sys.stiffness.matvec(u, &mut au);
    let mut mw = vec![0.0; n];
    sys.mass.matvec(&w, &mut mw);
    let e2 = spec.epsilon * spec.epsilon;
    sys.free_nodes
        .iter()
        .map(|&z| (e2 * au[z] + mw[z]).abs())
        .fold(0.0, f64::max)
}

/// Free-node submatrix of `e2 * stiffness + mass * diag(c)`; also returns
/// the node-to-reduced-index map.
fn reduced_matrix(sys: &SparseSystem, e2: f64, c_nodes: &[f64]) -> (Csr, Vec<usize>) {
    let n_free = sys.free_nodes.len();
    let mut index = vec![usize::MAX; sys.stiffness.n];
    for (k, &z) in sys.free_nodes.iter().enumerate() {
        index[z] = k;
    }
    let mut triplets = Vec::new();
    for &z in &sys.free_nodes {
        let r = index[z];
        let (cols, vals) = sys.stiffness.row(z);
        for (&c, &v) in cols.iter().zip(vals) {
            if index[c] != usize::MAX {
                triplets.push((r, index[c], e2 * v));
            }
        }
        let (cols, vals) = sys.mass.row(z);
        for (&c, &v) in cols.iter().zip(vals) {
            if index[c] != usize::MAX && c_nodes[c] != 0.0 {
                triplets.push((r, index[c], v * c_nodes[c]));
            }
        }
    }
    (Csr::from_triplets(n_free, &mut triplets), index)
}

/// Solves the linear problem `f = c(x,y) u - rhs(x,y)`.
pub fn solve_linear(mesh: &Triangulation, spec: &ProblemSpec) -> Result<FemSolution, FemError> {
    let (c, rhs) = match &spec.reaction {
        Reaction::Linear { c, rhs } => (c, rhs),
        Reaction::Semilinear { .. } => {
            return Err(FemError::InvalidProblem(
                "solve_linear requires a linear reaction".into(),
            ))
        }
    };
    let n = mesh.n_nodes();
    let sys = assemble(mesh);
    let c_nodes: Vec<f64> = mesh.points.iter().map(|p| c(p.x, p.y)).collect();
    if let Some(z) = (0..n).find(|&z| c_nodes[z] < 0.0) {
        return Err(FemError::InvalidProblem(format!(
            "reaction coefficient negative at node {z}"
        )));
    }
    let rhs_nodes: Vec<f64> = mesh.points.iter().map(|p| rhs(p.x, p.y)).collect();
    let mut m_rhs = vec![0.0; n];
    sys.mass.matvec(&rhs_nodes, &mut m_rhs);

    let e2 = spec.epsilon * spec.epsilon;
    let (reduced, index) = reduced_matrix(&sys, e2, &c_nodes);
    let b: Vec<f64> = sys.free_nodes.iter().map(|&z| m_rhs[z]).collect();
    let x = solve_sparse(&reduced, &b)?;

    let mut u = vec![0.0; n];
    for &z in &sys.free_nodes {
        u[z] = x[index[z]];
    }
    let res = residual_inf_norm(mesh, &sys, spec, &u);
    let scale = 1.0 + b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if res > 1e-10 * scale {
        return Err(FemError::SolverFailure(LinalgError::NoConvergence(res, 1)));
    }
    Ok(FemSolution { nodal_values: u, residual_inf: res, newton_iterations: 1 })
}

#[derive(Clone, Copy, Debug)]
pub struct NewtonParams {
    pub max_iter: usize,
    pub damping_floor: f64,
    pub tol_factor: f64,
}

impl Default for NewtonParams {
    fn default() -> Self {
        Self { max_iter: 50, damping_floor: 2f64.powi(-10), tol_factor: 1e-10 }
    }
}

/// Damped Newton iteration on `eps^2 A u + M w(u) = 0` starting from zero;
/// terminates when the residual infinity norm drops below
/// `tol_factor * (initial residual + 1)`.
pub fn solve_semilinear(
    mesh: &Triangulation,
    spec: &ProblemSpec,
    params: NewtonParams,
) -> Result<FemSolution, FemError> {
    let n = mesh.n_nodes();
    let sys = assemble(mesh);
    let e2 = spec.epsilon * spec.epsilon;
    let mut u = vec![0.0; n];

    let residual_vec = |u: &[f64]| -> Vec<f64> {
        let w: Vec<f64> = (0..n)
            .map(|z| {
                let p = mesh.points[z];
                spec.reaction.eval(p.x, p.y, u[z])
            })
            .collect();
        let mut au = vec![0.0; n];
        sys.stiffness.matvec(u, &mut au);
        let mut mw = vec![0.0; n];
        sys.mass.matvec(&w, &mut mw);
        sys.free_nodes.iter().map(|&z| e2 * au[z] + mw[z]).collect()
    };
    let inf = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));

    let mut r = residual_vec(&u);
    let tol = params.tol_factor * (inf(&r) + 1.0);
    let mut iterations = 0;
    while inf(&r) > tol {
        if iterations >= params.max_iter {
            return Err(FemError::NewtonDivergence {
                max_iter: params.max_iter,
                residual: inf(&r),
            });
        }
        iterations += 1;
        let du: Vec<f64> = (0..n)
            .map(|z| {
                let p = mesh.points[z];
                spec.reaction.eval_du(p.x, p.y, u[z])
            })
            .collect();
        let (jac, index) = reduced_matrix(&sys, e2, &du);
        let minus_r: Vec<f64> = r.iter().map(|v| -v).collect();
        let step = solve_sparse(&jac, &minus_r)?;

        let rnorm = inf(&r);
        let mut lambda = 1.0;
        loop {
            let mut trial = u.clone();
            for &z in &sys.free_nodes {
                trial[z] += lambda * step[index[z]];
            }
            let r_trial = residual_vec(&trial);
            if inf(&r_trial) < rnorm || lambda < params.damping_floor {
                u = trial;
                r = r_trial;
                break;
            }
            lambda *= 0.5;
        }
    }
    Ok(FemSolution {
        nodal_values: u,
        residual_inf: inf(&r),
        newton_iterations: iterations,
    })
}

/// Constant gradient of the P1 field on each triangle.
pub fn gradient_per_triangle(mesh: &Triangulation, nodal: &[f64]) -> Vec<(f64, f64)> {
    (0..mesh.triangles.len())
        .map(|t| {
            let pts = mesh.triangle_points(t);
            let verts = mesh.triangles[t].vertices;
            let grads = p1_gradients(pts);
            let mut g = (0.0, 0.0);
            for i in 0..3 {
                g.0 += nodal[verts[i]] * grads[i].0;
                g.1 += nodal[verts[i]] * grads[i].1;
            }
            g
        })
        .collect()
}

/// Jump of the normal derivative across an interior edge. The normal points
/// from the adjacent triangle with the smaller id to the larger one, fixing
/// the sign; the magnitude is orientation-independent.
#[derive(Clone, Copy, Debug)]
pub struct EdgeJump {
    pub edge: usize,
    pub jump_value: f64,
    pub magnitude: f64,
}

pub fn edge_normal_jump(
    mesh: &Triangulation,
    nodal: &[f64],
    edge: usize,
) -> Result<EdgeJump, FemError> {
    let gradients = gradient_per_triangle(mesh, nodal);
    edge_jump_from_gradients(mesh, &gradients, edge)
}

fn edge_jump_from_gradients(
    mesh: &Triangulation,
    gradients: &[(f64, f64)],
    edge: usize,
) -> Result<EdgeJump, FemError> {
    let e = &mesh.edges[edge];
    if e.is_boundary {
        return Err(FemError::BoundaryEdge(edge));
    }
    let (t1, t2) = (
        e.triangles[0].min(e.triangles[1]),
        e.triangles[0].max(e.triangles[1]),
    );
    let [a, b] = e.nodes;
    let (pa, pb) = (mesh.points[a], mesh.points[b]);
    let len = e.length;
    let mut normal = ((pb.y - pa.y) / len, -(pb.x - pa.x) / len);
    let centroid = |t: usize| {
        let pts = mesh.triangle_points(t);
        Point2::new(
            (pts[0].x + pts[1].x + pts[2].x) / 3.0,
            (pts[0].y + pts[1].y + pts[2].y) / 3.0,
        )
    };
    let (c1, c2) = (centroid(t1), centroid(t2));
    if normal.0 * (c2.x - c1.x) + normal.1 * (c2.y - c1.y) < 0.0 {
        normal = (-normal.0, -normal.1);
    }
    let (g1, g2) = (gradients[t1], gradients[t2]);
    let jump_value = (g1.0 - g2.0) * normal.0 + (g1.1 - g2.1) * normal.1;
    Ok(EdgeJump { edge, jump_value, magnitude: jump_value.abs() })
}

/// Jumps for every edge; boundary edges carry zero by convention.
pub fn all_edge_jumps(mesh: &Triangulation, nodal: &[f64]) -> Vec<EdgeJump> {
    let gradients = gradient_per_triangle(mesh, nodal);
    (0..mesh.edges.len())
        .map(|e| {
            if mesh.edges[e].is_boundary {
                EdgeJump { edge: e, jump_value: 0.0, magnitude: 0.0 }
            } else {
                edge_jump_from_gradients(mesh, &gradients, e).expect("interior edge")
            }
        })
        .collect()
}

/// Barycentric coordinates of `p` in the triangle.
pub fn barycentric(pts: [Point2; 3], p: Point2) -> [f64; 3] {
    let det = signed_area2(pts[0], pts[1], pts[2]);
    [
        signed_area2(p, pts[1], pts[2]) / det,
        signed_area2(pts[0], p, pts[2]) / det,
        signed_area2(pts[0], pts[1], p) / det,
    ]
}

/// Value of the P1 field at a point of triangle `t`.
pub fn eval_p1(mesh: &Triangulation, nodal: &[f64], t: usize, x: f64, y: f64) -> f64 {
    let pts = mesh.triangle_points(t);
    let verts = mesh.triangles[t].vertices;
    let l = barycentric(pts, Point2::new(x, y));
    l[0] * nodal[verts[0]] + l[1] * nodal[verts[1]] + l[2] * nodal[verts[2]]
}

/// Energy norm `{eps^2 ||grad v||^2 + ||v||^2}^(1/2)` of an analytic field
/// over a set of triangles (the whole mesh when `tris` is `None`).
pub fn energy_norm(
    mesh: &Triangulation,
    tris: Option<&[usize]>,
    v: impl Fn(f64, f64) -> f64,
    grad_v: impl Fn(f64, f64) -> (f64, f64),
    epsilon: f64,
    rule: &TriangleRule,
) -> f64 {
    let e2 = epsilon * epsilon;
    let mut integrand = |x: f64, y: f64| {
        let g = grad_v(x, y);
        let val = v(x, y);
        e2 * (g.0 * g.0 + g.1 * g.1) + val * val
    };
    let all: Vec<usize>;
    let tris = match tris {
        Some(t) => t,
        None => {
            all = (0..mesh.triangles.len()).collect();
            &all
        }
    };
    let total: f64 = tris
        .iter()
        .map(|&t| integrate_triangle_pts(&mut integrand, mesh.triangle_points(t), rule))
        .sum();
    total.max(0.0).sqrt()
}

/// Energy error `|||u_h - u|||` against the attached exact solution by
/// per-triangle quadrature. When the exact solution declares layer
/// `x_breaks`, every triangle integral becomes a composite over vertical
/// strips refined toward those lines, so sub-cell layers are resolved.
pub fn energy_error(
    mesh: &Triangulation,
    u_h: &FemSolution,
    spec: &ProblemSpec,
    rule: &TriangleRule,
) -> Result<f64, FemError> {
    let exact = spec.exact.as_ref().ok_or(FemError::MissingExactSolution)?;
    let e2 = spec.epsilon * spec.epsilon;
    let gradients = gradient_per_triangle(mesh, &u_h.nodal_values);
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        let pts = mesh.triangle_points(t);
        let gh = gradients[t];
        let mut integrand = |x: f64, y: f64| {
            let diff = eval_p1(mesh, &u_h.nodal_values, t, x, y) - (exact.u)(x, y);
            let ge = (exact.grad)(x, y);
            let (dx, dy) = (gh.0 - ge.0, gh.1 - ge.1);
            e2 * (dx * dx + dy * dy) + diff * diff
        };
        total += match &exact.x_breaks {
            Some(breaks) => integrate_triangle_x_strips(&mut integrand, pts, rule, breaks),
            None => integrate_triangle_pts(&mut integrand, pts, rule),
        };
    }
    Ok(total.max(0.0).sqrt())
}

/// L2 norm squared of `f(.; u_h) - I[f(.; u_h)]` over the domain
/// (the quadrature-residual term of the estimator).
pub fn reaction_interpolation_error_sq(
    mesh: &Triangulation,
    u_h: &FemSolution,
    spec: &ProblemSpec,
    rule: &TriangleRule,
) -> f64 {
    let f_nodes: Vec<f64> = (0..mesh.n_nodes())
        .map(|z| {
            let p = mesh.points[z];
            spec.reaction.eval(p.x, p.y, u_h.nodal_values[z])
        })
        .collect();
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        let pts = mesh.triangle_points(t);
        let mut integrand = |x: f64, y: f64| {
            let fh = spec
                .reaction
                .eval(x, y, eval_p1(mesh, &u_h.nodal_values, t, x, y));
            let fhi = eval_p1(mesh, &f_nodes, t, x, y);
            (fh - fhi) * (fh - fhi)
        };
        total += match spec.exact.as_ref().and_then(|e| e.x_breaks.as_ref()) {
            Some(breaks) => integrate_triangle_x_strips(&mut integrand, pts, rule, breaks),
            None => integrate_triangle_pts(&mut integrand, pts, rule),
        };
    }
    total
}

/// Edge integral of `v phi_z` along edge `e`, with `phi_z` the hat of node
/// `z` (an endpoint): it decays linearly from 1 at `z` to 0 at the far end.
pub fn integrate_edge_with_hat(
    mesh: &Triangulation,
    e: usize,
    z: usize,
    mut v: impl FnMut(f64, f64) -> f64,
    rule: &EdgeRule,
) -> f64 {
    let [a, b] = mesh.edges[e].nodes;
    let (from, to) = if a == z { (a, b) } else { (b, a) };
    let (pa, pb) = (mesh.points[from], mesh.points[to]);
    let len2 = mesh.edges[e].length * mesh.edges[e].length;
    crate::quadrature::integrate_edge(
        |x, y| {
            let t = ((x - pa.x) * (pb.x - pa.x) + (y - pa.y) * (pb.y - pa.y)) / len2;
            v(x, y) * (1.0 - t)
        },
        pa,
        pb,
        rule,
    )
}
