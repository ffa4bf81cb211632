//! Fixed-degree quadrature on triangles, edges and node patches, plus
//! composite variants over a fixed x-partition or a uniform barycentric
//! refinement. Rules carry reference-measure weights (summing to one), so
//! an integral is the element measure times the weighted sample sum.

use crate::mesh::{signed_area2, NodePatch, Point2, Triangulation};

/// Symmetric quadrature rule on the reference triangle.
#[derive(Clone, Debug)]
pub struct TriangleRule {
    /// Barycentric coordinates of the sample points.
    pub points: Vec<[f64; 3]>,
    /// Weights, summing to one.
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

/// Gauss rule on the reference interval [0, 1].
#[derive(Clone, Debug)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl TriangleRule {
    /// Shipped symmetric rules of exactness degree 2, 4 or 6.
    pub fn with_degree(degree: usize) -> TriangleRule {
        match degree {
            0..=2 => {
                let a = 2.0 / 3.0;
                let b = 1.0 / 6.0;
                TriangleRule {
                    points: vec![[a, b, b], [b, a, b], [b, b, a]],
                    weights: vec![1.0 / 3.0; 3],
                    exactness_degree: 2,
                }
            }
            3..=4 => {
                let mut points = Vec::new();
                let mut weights = Vec::new();
                push_sym3(&mut points, &mut weights, 0.445948490915965, 0.223381589678011);
                push_sym3(&mut points, &mut weights, 0.091576213509771, 0.109951743655322);
                TriangleRule { points, weights, exactness_degree: 4 }
            }
            _ => {
                let mut points = Vec::new();
                let mut weights = Vec::new();
                push_sym3(&mut points, &mut weights, 0.249286745170910, 0.116786275726379);
                push_sym3(&mut points, &mut weights, 0.063089014491502, 0.050844906370207);
                push_sym6(
                    &mut points,
                    &mut weights,
                    0.310352451033785,
                    0.053145049844816,
                    0.082851075618374,
                );
                TriangleRule { points, weights, exactness_degree: 6 }
            }
        }
    }
}

fn push_sym3(points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>, a: f64, w: f64) {
    let c = 1.0 - 2.0 * a;
    points.extend_from_slice(&[[c, a, a], [a, c, a], [a, a, c]]);
    weights.extend_from_slice(&[w, w, w]);
}

fn push_sym6(points: &mut Vec<[f64; 3]>, weights: &mut Vec<f64>, a: f64, b: f64, w: f64) {
    let c = 1.0 - a - b;
    points.extend_from_slice(&[[c, a, b], [c, b, a], [a, c, b], [b, c, a], [a, b, c], [b, a, c]]);
    weights.extend_from_slice(&[w; 6]);
}

impl EdgeRule {
    /// Gauss-Legendre rule with `n` points (1..=6), exact to degree `2n - 1`.
    #[allow(clippy::excessive_precision)] // tabulated constants kept verbatim
    pub fn gauss(n: usize) -> EdgeRule {
        // nodes/weights on [-1, 1]
        let (x, w): (Vec<f64>, Vec<f64>) = match n.clamp(1, 6) {
            1 => (vec![0.0], vec![2.0]),
            2 => {
                let a = 0.5773502691896258;
                (vec![-a, a], vec![1.0, 1.0])
            }
            3 => {
                let a = 0.7745966692414834;
                (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
            }
            4 => (
                vec![
                    -0.8611363115940526,
                    -0.3399810435848563,
                    0.3399810435848563,
                    0.8611363115940526,
                ],
                vec![
                    0.3478548451374538,
                    0.6521451548625461,
                    0.6521451548625461,
                    0.3478548451374538,
                ],
            ),
            5 => (
                vec![
                    -0.9061798459386640,
                    -0.5384693101056831,
                    0.0,
                    0.5384693101056831,
                    0.9061798459386640,
                ],
                vec![
                    0.2369268850561891,
                    0.4786286704993665,
                    0.5688888888888889,
                    0.4786286704993665,
                    0.2369268850561891,
                ],
            ),
            _ => (
                vec![
                    -0.9324695142031521,
                    -0.6612093864662645,
                    -0.2386191860831969,
                    0.2386191860831969,
                    0.6612093864662645,
                    0.9324695142031521,
                ],
                vec![
                    0.1713244923791704,
                    0.3607615730481386,
                    0.4679139345726910,
                    0.4679139345726910,
                    0.3607615730481386,
                    0.1713244923791704,
                ],
            ),
        };
        let n = x.len();
        EdgeRule {
            points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
            weights: w.iter().map(|v| 0.5 * v).collect(),
            exactness_degree: 2 * n - 1,
        }
    }
}

/// Integral of `f` over the triangle with the given corner points.
pub fn integrate_triangle_pts(
    f: &mut dyn FnMut(f64, f64) -> f64,
    pts: [Point2; 3],
    rule: &TriangleRule,
) -> f64 {
    let area = 0.5 * signed_area2(pts[0], pts[1], pts[2]).abs();
    let mut sum = 0.0;
    for (bary, w) in rule.points.iter().zip(&rule.weights) {
        let x = bary[0] * pts[0].x + bary[1] * pts[1].x + bary[2] * pts[2].x;
        let y = bary[0] * pts[0].y + bary[1] * pts[1].y + bary[2] * pts[2].y;
        sum += w * f(x, y);
    }
    area * sum
}

/// Integral of `f` over triangle `t` of the mesh.
pub fn integrate_triangle(
    mesh: &Triangulation,
    t: usize,
    mut f: impl FnMut(f64, f64) -> f64,
    rule: &TriangleRule,
) -> f64 {
    integrate_triangle_pts(&mut f, mesh.triangle_points(t), rule)
}

/// Integral of `f` along the segment from `a` to `b`.
pub fn integrate_edge(
    mut f: impl FnMut(f64, f64) -> f64,
    a: Point2,
    b: Point2,
    rule: &EdgeRule,
) -> f64 {
    let len = a.dist(b);
    let mut sum = 0.0;
    for (&t, &w) in rule.points.iter().zip(&rule.weights) {
        sum += w * f(a.x + t * (b.x - a.x), a.y + t * (b.y - a.y));
    }
    len * sum
}

/// Integral of `f` over a node patch: the sum of member-triangle integrals.
pub fn integrate_patch(
    mesh: &Triangulation,
    patch: &NodePatch,
    mut f: impl FnMut(f64, f64) -> f64,
    rule: &TriangleRule,
) -> f64 {
    patch
        .triangles
        .iter()
        .map(|&t| integrate_triangle_pts(&mut f, mesh.triangle_points(t), rule))
        .sum()
}

/// Integral over the triangle refined into `k^2` congruent subtriangles;
/// resolves kinks of `|v|`-type integrands to the subgrid scale.
pub fn integrate_triangle_subdivided(
    f: &mut dyn FnMut(f64, f64) -> f64,
    pts: [Point2; 3],
    rule: &TriangleRule,
    k: usize,
) -> f64 {
    let k = k.max(1);
    let at = |i: usize, j: usize| {
        let l1 = i as f64 / k as f64;
        let l2 = j as f64 / k as f64;
        let l0 = 1.0 - l1 - l2;
        Point2::new(
            l0 * pts[0].x + l1 * pts[1].x + l2 * pts[2].x,
            l0 * pts[0].y + l1 * pts[1].y + l2 * pts[2].y,
        )
    };
    let mut sum = 0.0;
    for i in 0..k {
        for j in 0..k - i {
            sum += integrate_triangle_pts(f, [at(i, j), at(i + 1, j), at(i, j + 1)], rule);
            if i + j + 2 <= k {
                sum += integrate_triangle_pts(f, [at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)], rule);
            }
        }
    }
    sum
}

/// Integral along a segment split into `k` equal pieces.
pub fn integrate_edge_subdivided(
    mut f: impl FnMut(f64, f64) -> f64,
    a: Point2,
    b: Point2,
    rule: &EdgeRule,
    k: usize,
) -> f64 {
    let k = k.max(1);
    let mut sum = 0.0;
    for i in 0..k {
        let t0 = i as f64 / k as f64;
        let t1 = (i + 1) as f64 / k as f64;
        let p = Point2::new(a.x + t0 * (b.x - a.x), a.y + t0 * (b.y - a.y));
        let q = Point2::new(a.x + t1 * (b.x - a.x), a.y + t1 * (b.y - a.y));
        sum += integrate_edge(&mut f, p, q, rule);
    }
    sum
}

/// Partition of `[a, b]` refined geometrically (factor 2) toward both ends
/// down to intervals of roughly `scale`. Used to resolve boundary-layer
/// integrands of width `~scale` near the interval ends.
pub fn geometric_breaks(a: f64, b: f64, scale: f64) -> Vec<f64> {
    let len = b - a;
    let mut offsets = vec![0.0];
    let mut d = scale.clamp(1e-300, len / 2.0);
    while d < len / 2.0 {
        offsets.push(d);
        d *= 2.0;
    }
    let mut breaks: Vec<f64> = offsets.iter().map(|&o| a + o).collect();
    breaks.extend(offsets.iter().map(|&o| b - o));
    breaks.push(b);
    breaks.sort_by(|p, q| p.partial_cmp(q).unwrap());
    breaks.dedup_by(|p, q| (*p - *q).abs() < 1e-15 * len.max(1.0));
    breaks
}

/// Clips a convex polygon to the vertical slab `lo <= x <= hi`.
fn clip_polygon_x(poly: &[Point2], lo: f64, hi: f64) -> Vec<Point2> {
    let clip = |poly: &[Point2], inside: &dyn Fn(Point2) -> bool, cross_x: f64| -> Vec<Point2> {
        let mut out = Vec::with_capacity(poly.len() + 2);
        for i in 0..poly.len() {
            let p = poly[i];
            let q = poly[(i + 1) % poly.len()];
            let (pin, qin) = (inside(p), inside(q));
            if pin {
                out.push(p);
            }
            if pin != qin && (q.x - p.x).abs() > 0.0 {
                let t = (cross_x - p.x) / (q.x - p.x);
                if (0.0..=1.0).contains(&t) {
                    out.push(Point2::new(cross_x, p.y + t * (q.y - p.y)));
                }
            }
        }
        out
    };
    let poly = clip(poly, &|p| p.x >= lo, lo);
    if poly.len() < 3 {
        return Vec::new();
    }
    clip(&poly, &|p| p.x <= hi, hi)
}

/// Integral over a convex polygon by fan triangulation.
pub fn integrate_polygon(
    f: &mut dyn FnMut(f64, f64) -> f64,
    poly: &[Point2],
    rule: &TriangleRule,
) -> f64 {
    if poly.len() < 3 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 1..poly.len() - 1 {
        sum += integrate_triangle_pts(f, [poly[0], poly[i], poly[i + 1]], rule);
    }
    sum
}

/// Integral over a triangle as a composite over the vertical strips induced
/// by `breaks`; exactly additive, and accurate for integrands with sharp
/// x-variation on the scale of the local strip width.
pub fn integrate_triangle_x_strips(
    f: &mut dyn FnMut(f64, f64) -> f64,
    pts: [Point2; 3],
    rule: &TriangleRule,
    breaks: &[f64],
) -> f64 {
    let xmin = pts.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
    let xmax = pts.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    let mut lo = xmin;
    let inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > xmin && x < xmax)
        .collect();
    for hi in inner.into_iter().chain(std::iter::once(xmax)) {
        let piece = clip_polygon_x(&pts, lo, hi);
        sum += integrate_polygon(f, &piece, rule);
        lo = hi;
    }
    sum
}

/// Segment integral as a composite over the pieces cut by vertical lines.
pub fn integrate_edge_x_strips(
    mut f: impl FnMut(f64, f64) -> f64,
    a: Point2,
    b: Point2,
    rule: &EdgeRule,
    breaks: &[f64],
) -> f64 {
    if (a.x - b.x).abs() == 0.0 {
        return integrate_edge(&mut f, a, b, rule);
    }
    let mut ts: Vec<f64> = vec![0.0, 1.0];
    for &x in breaks {
        let t = (x - a.x) / (b.x - a.x);
        if t > 0.0 && t < 1.0 {
            ts.push(t);
        }
    }
    ts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut sum = 0.0;
    for w in ts.windows(2) {
        let p = Point2::new(a.x + w[0] * (b.x - a.x), a.y + w[0] * (b.y - a.y));
        let q = Point2::new(a.x + w[1] * (b.x - a.x), a.y + w[1] * (b.y - a.y));
        sum += integrate_edge(&mut f, p, q, rule);
    }
    sum
}
