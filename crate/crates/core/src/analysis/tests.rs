use super::*;
use crate::fem::{manufactured_sinsin, solve_linear};
use crate::mesh::{
    generate_patch, generate_shishkin, generate_uniform, node_patch, node_patches,
    ClassificationParams, PatchStyle,
};

const REF: [Point2; 3] = [
    Point2 { x: 0.0, y: 0.0 },
    Point2 { x: 1.0, y: 0.0 },
    Point2 { x: 0.0, y: 1.0 },
];

#[test]
fn test_function_gradient_consistent_with_finite_differences() {
    let mut rng = fuzz::SplitMix64::new(5);
    for _ in 0..20 {
        let v = fuzz::random_poly(&mut rng);
        for _ in 0..10 {
            let (x, y) = (rng.range(-1.0, 1.0), rng.range(-1.0, 1.0));
            let (gx, gy) = v.grad(x, y);
            let h = 1e-6;
            let fx = (v.eval(x + h, y) - v.eval(x - h, y)) / (2.0 * h);
            let fy = (v.eval(x, y + h) - v.eval(x, y - h)) / (2.0 * h);
            assert!((gx - fx).abs() < 1e-6 * (1.0 + gx.abs()));
            assert!((gy - fy).abs() < 1e-6 * (1.0 + gy.abs()));
        }
    }
}

#[test]
fn divergence_identity_reference_cases() {
    // v = 1, z at the right angle: both sides equal 1/2
    let (lhs, rhs) = divergence_identity(REF, 0, &TestFunction::constant(1.0)).unwrap();
    assert!((lhs - 0.5).abs() < 1e-14);
    assert!((rhs - 0.5).abs() < 1e-14);
    // v = x: LHS = 0 (x vanishes on S'), RHS = -1/6 + 1/6 = 0
    let (lhs, rhs) = divergence_identity(REF, 0, &TestFunction::monomial(1, 0)).unwrap();
    assert!(lhs.abs() < 1e-15);
    assert!(rhs.abs() < 1e-15);
    // v = 0
    let r = divergence_identity_residual(REF, 0, &TestFunction::constant(0.0)).unwrap();
    assert!(r == 0.0);
}

#[test]
fn divergence_identity_on_random_anisotropic_triangles() {
    let mut rng = fuzz::SplitMix64::new(17);
    for &aspect in &[1.0, 100.0, 1e4] {
        for _ in 0..50 {
            let pts = fuzz::random_triangle(&mut rng, aspect);
            for v in fuzz::monomials() {
                for z_local in 0..3 {
                    let (lhs, rhs) = divergence_identity(pts, z_local, &v).unwrap();
                    let scale = lhs.abs() + rhs.abs() + 1.0;
                    assert!(
                        (lhs - rhs).abs() <= 1e-12 * scale,
                        "aspect {aspect} residual {} scale {scale}",
                        (lhs - rhs).abs()
                    );
                }
            }
        }
    }
}

#[test]
fn aux_a_reference_case_has_ratio_one() {
    // v = 1, S' the y-axis edge: lhs = 1/2, rhs = |T| / |S''| = 1/2
    let r = check_aux_a(REF, 0, &TestFunction::constant(1.0)).unwrap();
    assert!((r.lhs - 0.5).abs() < 1e-13);
    assert!((r.rhs - 0.5).abs() < 1e-13);
    assert!((r.ratio - 1.0).abs() < 1e-12);
}

#[test]
fn aux_a_rejects_negative_test_functions() {
    let v = TestFunction {
        coeffs: [-1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    };
    assert!(matches!(
        check_aux_a(REF, 0, &v),
        Err(AnalysisError::NegativeTestFunction(_))
    ));
}

#[test]
fn aux_a_zero_function_flags_both_zero() {
    let r = check_aux_a(REF, 0, &TestFunction::constant(0.0)).unwrap();
    assert_eq!(r.ratio, 0.0);
    assert!(!r.degenerate);
}

#[test]
fn aux_b_reference_case_has_ratio_one() {
    let r = check_aux_b(REF, 0, &TestFunction::constant(1.0)).unwrap();
    assert!((r.lhs - 0.5).abs() < 1e-13);
    assert!((r.rhs - 0.5).abs() < 1e-13);
    assert!((r.ratio - 1.0).abs() < 1e-12);
}

#[test]
fn aux_bounds_hold_on_thin_triangles() {
    let pts = [
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.0),
        Point2::new(0.5, 1e-3),
    ];
    let mut rng = fuzz::SplitMix64::new(23);
    for _ in 0..50 {
        let v = fuzz::random_nonneg_poly(&mut rng);
        for z_local in 0..3 {
            let a = check_aux_a(pts, z_local, &v).unwrap();
            assert!(a.ratio <= 1.0 + 1e-6, "aux_a ratio {}", a.ratio);
            let b = check_aux_b(pts, z_local, &v).unwrap();
            assert!(b.ratio <= 1.5, "aux_b ratio {}", b.ratio);
        }
    }
}

#[test]
fn scaled_trace_isotropic_reference_values() {
    let mesh = generate_patch(1.0, 1.0, 6, PatchStyle::Fan, 0.0).unwrap();
    let patch = node_patch(&mesh, 0, &ClassificationParams::default());
    let one = TestFunction::constant(1.0);
    for &edge in &patch.interior_edges {
        let r = check_scaled_trace_l1(&mesh, &patch, &one, edge).unwrap();
        // lhs = |S|/2, rhs = |omega_z| * weight
        assert!((r.lhs - mesh.edges[edge].length / 2.0).abs() < 1e-13);
        assert!(r.ratio <= 1.0);
        let rsq = check_scaled_trace_sq(&mesh, &patch, &one, edge).unwrap();
        let want = mesh.edges[edge].length / 4.0;
        assert!((rsq.lhs - want).abs() < 1e-13);
        assert!(rsq.ratio.is_finite());
    }
    // zero function
    let zero = TestFunction::constant(0.0);
    let e = patch.interior_edges[0];
    assert_eq!(check_scaled_trace_l1(&mesh, &patch, &zero, e).unwrap().ratio, 0.0);
    assert_eq!(check_scaled_trace_sq(&mesh, &patch, &zero, e).unwrap().ratio, 0.0);
}

#[test]
fn scaled_trace_rejects_foreign_edges() {
    let mesh = generate_patch(1.0, 0.1, 6, PatchStyle::Strip, 0.0).unwrap();
    let patch = node_patch(&mesh, 0, &ClassificationParams::default());
    // rim edge: belongs to the patch boundary, not to the star of z
    let rim_edge = (0..mesh.edges.len())
        .find(|&e| !mesh.edges[e].nodes.contains(&0))
        .unwrap();
    assert!(matches!(
        check_scaled_trace_l1(&mesh, &patch, &TestFunction::constant(1.0), rim_edge),
        Err(AnalysisError::EdgeNotInPatch(_, 0))
    ));
}

#[test]
fn scaled_trace_bounded_on_aspect_sweep() {
    // the point of the inequality: ratios do not grow with the aspect ratio
    let mut worst: f64 = 0.0;
    for &aspect in &[1.0, 1e2, 1e4] {
        let mesh = generate_patch(1.0, 1.0 / aspect, 6, PatchStyle::Strip, 0.0).unwrap();
        let patch = node_patch(&mesh, 0, &ClassificationParams::default());
        let v = TestFunction::monomial(1, 0);
        for &edge in &patch.interior_edges {
            let r = check_scaled_trace_l1(&mesh, &patch, &v, edge).unwrap();
            assert!(!r.degenerate);
            worst = worst.max(r.ratio);
        }
    }
    assert!(worst < 5.0, "trace ratios grew to {worst}");
}

#[test]
fn gbar_reference_values() {
    // constants reproduce
    let g = compute_gbar_struct(&|_| 3.25, 0.0, 0.5, 1.0, false, None).unwrap();
    assert!((g - 3.25).abs() < 1e-14);
    // g = x on the symmetric mesh 0, 0.5, 1
    let g = compute_gbar_struct(&|x| x, 0.0, 0.5, 1.0, false, None).unwrap();
    assert!((g - 0.5).abs() < 1e-14);
    // g = x on the asymmetric mesh 0, 0.25, 1: hand value 5/12
    let g = compute_gbar_struct(&|x| x, 0.0, 0.25, 1.0, false, None).unwrap();
    assert!((g - 5.0 / 12.0).abs() < 1e-14);
    // boundary nodes are forced to zero
    let g = compute_gbar_struct(&|x| x, 0.0, 0.25, 1.0, true, None).unwrap();
    assert_eq!(g, 0.0);
    // collapsed left side (boundary convention x_{-1} = x_0)
    let g = compute_gbar_struct(&|x| x, 0.0, 0.0, 1.0, false, None).unwrap();
    assert!((g - 1.0 / 3.0).abs() < 1e-14);
    // empty support
    assert!(matches!(
        compute_gbar_struct(&|x| x, 0.5, 0.5, 0.5, false, None),
        Err(AnalysisError::DegenerateSupport)
    ));
}

#[test]
fn gbar_is_linear_in_g() {
    let gbar = |f: &dyn Fn(f64) -> f64| {
        compute_gbar_struct(f, 0.0, 0.3, 1.0, false, None).unwrap()
    };
    let a = gbar(&|x| x * x);
    let b = gbar(&|x| (1.0 - x).powi(3));
    let combo = gbar(&|x| 2.0 * x * x - 0.5 * (1.0 - x).powi(3));
    assert!((combo - (2.0 * a - 0.5 * b)).abs() < 1e-13);
}

#[test]
fn gbar_bounds_on_structured_patch() {
    let mesh = generate_shishkin(8, 0.2, 2.0).unwrap();
    let grid = tensor_grid(&mesh).unwrap();
    let params = ClassificationParams::default();
    // an interior node
    let z = grid.node_at[4][3];
    assert!(!mesh.is_boundary_node(z));
    let patch = node_patch(&mesh, z, &params);
    let i = grid.x_index[z];
    // omega_z* = (x_{i-1}, x_{i+1}) x (y range of the patch)
    let ys: Vec<f64> = patch
        .vertex_ids(&mesh)
        .iter()
        .map(|&v| mesh.points[v].y)
        .collect();
    let rect = (
        grid.xs[i - 1],
        grid.xs[i + 1],
        ys.iter().cloned().fold(f64::INFINITY, f64::min),
        ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );

    // g = 0: everything zero
    let r = check_gbar_bounds(&mesh, &patch, rect, &|_, _| 0.0, &|_, _| (0.0, 0.0)).unwrap();
    assert_eq!(r.gbar, 0.0);
    assert_eq!(r.l1_lhs, 0.0);

    // g = 1: lhs = H_z, the zero-order rhs piece is |rect| / h_z >= H_z
    let r = check_gbar_bounds(&mesh, &patch, rect, &|_, _| 1.0, &|_, _| (0.0, 0.0)).unwrap();
    assert!((r.gbar - 1.0).abs() < 1e-13);
    assert!((r.l1_lhs - patch.diameter).abs() < 1e-13);
    assert!(r.l1_lhs <= r.l1_rhs * (1.0 + 1e-12));
    assert!(r.sq_lhs <= r.sq_rhs * (1.0 + 1e-12));

    // g = x stays within a moderate constant
    let r = check_gbar_bounds(&mesh, &patch, rect, &|x, _| x, &|_, _| (1.0, 0.0)).unwrap();
    assert!(r.l1_lhs <= 3.0 * r.l1_rhs);
    assert!(r.sq_lhs <= 3.0 * r.sq_rhs);
}

#[test]
fn min_inequality_cases() {
    let (lhs, rhs, holds) = check_min_inequality(1.0, 1.0, 1.0, 1.0).unwrap();
    assert!((lhs - 1.0).abs() < 1e-15 && (rhs - 2.0).abs() < 1e-15 && holds);
    let (lhs, rhs, holds) = check_min_inequality(2.0, 3.0, 5.0, 1.0).unwrap();
    assert!((lhs - 5.0).abs() < 1e-15 && (rhs - 7.0).abs() < 1e-15 && holds);
    assert!(matches!(
        check_min_inequality(0.0, 1.0, 1.0, 1.0),
        Err(AnalysisError::NonPositiveInput)
    ));
}

#[test]
fn theta_of_constant_matches_double_loop_oracle() {
    let mesh = generate_uniform(4).unwrap();
    let params = ClassificationParams::default();
    let patches = node_patches(&mesh, &params);
    let rule = TriangleRule::with_degree(4);
    let ones = vec![1.0; mesh.n_nodes()];
    let rec = compute_theta(&mesh, &patches, 1.0, ThetaField::P1(&ones), &rule);
    // oracle: directly sum (1 + H_z^-2) |omega_z| over nodes
    let mut want = 0.0;
    for patch in &patches {
        let mut area = 0.0;
        for &t in &patch.triangles {
            area += mesh.triangle_geometry(t).area;
        }
        want += (1.0 + 1.0 / (patch.diameter * patch.diameter)) * area;
    }
    assert!((rec.theta - want).abs() < 1e-11 * want);
    assert_eq!(rec.gradient_part, 0.0);

    // Theta = 0 iff g = 0
    let zeros = vec![0.0; mesh.n_nodes()];
    let rec0 = compute_theta(&mesh, &patches, 1.0, ThetaField::P1(&zeros), &rule);
    assert_eq!(rec0.theta, 0.0);

    // quadratic homogeneity
    let spec = manufactured_sinsin(0.5);
    let field: Vec<f64> = mesh
        .points
        .iter()
        .map(|p| (spec.exact.as_ref().unwrap().u)(p.x, p.y))
        .collect();
    let scaled: Vec<f64> = field.iter().map(|v| 3.0 * v).collect();
    let r1 = compute_theta(&mesh, &patches, 0.5, ThetaField::P1(&field), &rule);
    let r9 = compute_theta(&mesh, &patches, 0.5, ThetaField::P1(&scaled), &rule);
    assert!((r9.theta - 9.0 * r1.theta).abs() < 1e-11 * r9.theta);

    // analytic route agrees with the P1 route for a P1-exact field
    let lin: Vec<f64> = mesh.points.iter().map(|p| 0.3 * p.x - p.y + 0.1).collect();
    let rp = compute_theta(&mesh, &patches, 0.7, ThetaField::P1(&lin), &rule);
    let ra = compute_theta(
        &mesh,
        &patches,
        0.7,
        ThetaField::Analytic { f: &|x, y| 0.3 * x - y + 0.1, grad: &|_, _| (0.3, -1.0) },
        &rule,
    );
    assert!((rp.theta - ra.theta).abs() < 1e-11 * ra.theta);
}

#[test]
fn tensor_grid_detection() {
    assert!(tensor_grid(&generate_uniform(3).unwrap()).is_ok());
    assert!(tensor_grid(&generate_shishkin(8, 1e-2, 2.0).unwrap()).is_ok());
    // a patch mesh is not a tensor grid
    let patch = generate_patch(1.0, 0.5, 6, PatchStyle::Fan, 0.0).unwrap();
    assert!(matches!(
        tensor_grid(&patch),
        Err(AnalysisError::UnstructuredMesh)
    ));
}

#[test]
fn error_representation_zero_error_guard() {
    let mesh = generate_uniform(4).unwrap();
    // exact solution identical to u_h = 0 with f = u: error below threshold
    let mut spec = crate::fem::ProblemSpec::new(
        1.0,
        crate::fem::Reaction::linear_const_c(1.0, |_, _| 0.0),
        1.0,
    )
    .unwrap();
    spec.exact = Some(crate::fem::ExactSolution {
        u: Box::new(|_, _| 0.0),
        grad: Box::new(|_, _| (0.0, 0.0)),
        laplacian: None,
        energy_sq: Some(0.0),
        x_breaks: None,
    });
    let u_h = solve_linear(&mesh, &spec).unwrap();
    assert!(matches!(
        verify_error_representation(&mesh, &u_h, &spec),
        Err(AnalysisError::ZeroError)
    ));
}

#[test]
fn error_representation_terms_invariant_under_gbar_choice() {
    // I + II is invariant under any admissible {gbar_z} (zero on the
    // boundary): changing gbar_z shifts I by the discrete residual row at z,
    // which vanishes by Galerkin orthogonality. Compare the structured
    // averages against gbar = 0.
    let mesh = generate_uniform(8).unwrap();
    let spec = manufactured_sinsin(1.0);
    let u_h = solve_linear(&mesh, &spec).unwrap();

    let rec = verify_error_representation(&mesh, &u_h, &spec).unwrap();

    // gbar = 0 variant, computed through the same internals by zeroing out
    // the structured averages: emulate by calling with a spec whose exact
    // solution is shifted so rows produce gbar ~ 0 is not possible; instead
    // recompute I + II directly here with gbar = 0.
    let rule = TriangleRule::with_degree(6);
    let erule = EdgeRule::gauss(6);
    let error = crate::fem::energy_error(&mesh, &u_h, &spec, &rule).unwrap();
    let exact = spec.exact.as_ref().unwrap();
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
    let g_in_tri = |t: usize, x: f64, y: f64| -> f64 {
        let big_g = (eval_p1(&mesh, &u_h.nodal_values, t, x, y) - (exact.u)(x, y)) / error;
        big_g - eval_p1(&mesh, &g_nodes, t, x, y)
    };
    let jumps = all_edge_jumps(&mesh, &u_h.nodal_values);
    let mut i0 = 0.0;
    for (e, edge) in mesh.edges.iter().enumerate() {
        if edge.is_boundary {
            continue;
        }
        let t_owner = edge.triangles[0];
        for &z in &edge.nodes {
            let [a, b] = edge.nodes;
            let (from, to) = if a == z { (a, b) } else { (b, a) };
            let (pa, pb) = (mesh.points[from], mesh.points[to]);
            let len = edge.length;
            let integral = integrate_edge(
                |x, y| {
                    let t = Point2::new(x, y).dist(pa) / len;
                    g_in_tri(t_owner, x, y) * (1.0 - t)
                },
                pa,
                pb,
                &erule,
            );
            i0 += integral * jumps[e].jump_value;
        }
    }
    let mut ii0 = 0.0;
    for t in 0..mesh.triangles.len() {
        let pts = mesh.triangle_points(t);
        for local in 0..3 {
            ii0 += integrate_triangle_pts(
                &mut |x, y| {
                    let fhi = eval_p1(&mesh, &f_nodes, t, x, y);
                    fhi * g_in_tri(t, x, y) * hat_at(pts, local, x, y)
                },
                pts,
                &rule,
            );
        }
    }
    let sum_structured = rec.i_term + rec.ii_term;
    let sum_zero = i0 + ii0;
    assert!(
        (sum_structured - sum_zero).abs() < 1e-8 * (1.0 + sum_zero.abs()),
        "{sum_structured} vs {sum_zero}"
    );
}

#[test]
fn error_representation_ratio_moderate_on_benchmark() {
    let mesh = generate_shishkin(16, 1e-1, 2.0).unwrap();
    let spec = crate::fem::manufactured_layer1d(1e-1);
    let u_h = solve_linear(&mesh, &spec).unwrap();
    let rec = verify_error_representation(&mesh, &u_h, &spec).unwrap();
    assert!(rec.error > 0.0);
    assert!(rec.ratio.is_finite() && rec.ratio > 0.0);
    // Cauchy-Schwarz: E_quad <= ||f_h - f_h^I|| * ||G||_2 and ||G||_2 <= 1
    let quad_norm = crate::fem::reaction_interpolation_error_sq(
        &mesh,
        &u_h,
        &spec,
        &TriangleRule::with_degree(6),
    )
    .sqrt();
    assert!(rec.e_quad <= quad_norm + 1e-12, "{} vs {}", rec.e_quad, quad_norm);
}

#[test]
fn error_representation_invariant_under_error_rescaling() {
    // scaling the manufactured problem scales u - u_h linearly; G is
    // normalized, so the ratio is unchanged
    let mesh = generate_shishkin(8, 1e-1, 2.0).unwrap();

    let one = crate::fem::manufactured_layer1d(1e-1);
    let u1 = solve_linear(&mesh, &one).unwrap();
    let r1 = verify_error_representation(&mesh, &u1, &one).unwrap();

    // rescale: multiply the rhs and the exact solution by 10
    let base = crate::fem::manufactured_layer1d(1e-1);
    let (u_f, grad_f, energy) = {
        let e = base.exact.as_ref().unwrap();
        (e.u.as_ref(), e.grad.as_ref(), e.energy_sq.unwrap())
    };
    let _ = (u_f, grad_f);
    let scale = 10.0;
    let spec10 = {
        let rhs10 = move |x: f64, y: f64| {
            let e = crate::fem::manufactured_layer1d(1e-1);
            let r = match &e.reaction {
                crate::fem::Reaction::Linear { rhs, .. } => rhs(x, y),
                _ => unreachable!(),
            };
            scale * r
        };
        let exact10 = crate::fem::ExactSolution {
            u: Box::new(move |x, y| {
                let e = crate::fem::manufactured_layer1d(1e-1);
                scale * (e.exact.as_ref().unwrap().u)(x, y)
            }),
            grad: Box::new(move |x, y| {
                let e = crate::fem::manufactured_layer1d(1e-1);
                let g = (e.exact.as_ref().unwrap().grad)(x, y);
                (scale * g.0, scale * g.1)
            }),
            laplacian: None,
            energy_sq: Some(scale * scale * energy),
            x_breaks: base.exact.as_ref().unwrap().x_breaks.clone(),
        };
        crate::fem::ProblemSpec::new(
            1e-1,
            crate::fem::Reaction::linear_const_c(1.0, rhs10),
            1.0,
        )
        .unwrap()
        .with_exact(exact10)
    };
    let u10 = solve_linear(&mesh, &spec10).unwrap();
    let r10 = verify_error_representation(&mesh, &u10, &spec10).unwrap();
    assert!((r10.error - scale * r1.error).abs() < 1e-6 * r10.error);
    assert!((r10.ratio - r1.ratio).abs() < 1e-6 * r1.ratio.abs());
}
