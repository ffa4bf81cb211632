//! Deterministic fuzz sweeps for the inequality families across patch
//! aspect ratios. Runs are reproducible from the seed alone; reports carry
//! the worst case per family so regressions are diagnosable.

use serde::{Deserialize, Serialize};

use super::{
    check_aux_a, check_aux_b, check_min_inequality, check_scaled_trace_l1,
    check_scaled_trace_sq, divergence_identity, RatioReport, TestFunction,
};
use crate::mesh::{
    generate_patch, node_patch, ClassificationParams, PatchStyle, Point2, Triangulation,
};

/// SplitMix64: tiny deterministic generator, stable across platforms and
/// releases (report determinism is part of the contract).
#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    /// Divergence identity; ratios are residuals over `|LHS| + |RHS| + 1`.
    Divergence,
    AuxA,
    AuxB,
    TraceL1,
    TraceSq,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Divergence,
        Family::AuxA,
        Family::AuxB,
        Family::TraceL1,
        Family::TraceSq,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            Family::Divergence => "divergence",
            Family::AuxA => "aux-a",
            Family::AuxB => "aux-b",
            Family::TraceL1 => "trace-l1",
            Family::TraceSq => "trace-sq",
        }
    }

    pub fn from_id(id: &str) -> Option<Family> {
        Family::ALL.iter().copied().find(|f| f.id() == id)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WorstCase {
    pub aspect: f64,
    pub ratio: f64,
    pub geometry: Vec<[f64; 2]>,
    pub coeffs: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyReport {
    pub family: Family,
    pub count: usize,
    pub max_ratio: f64,
    /// Least-squares slope of `log10(max ratio per aspect)` vs `log10(aspect)`.
    pub aspect_slope: f64,
    pub per_aspect: Vec<(f64, f64)>,
    pub worst: WorstCase,
    /// Any sample with `rhs = 0 < lhs` (must never happen).
    pub degenerate_samples: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub samples_per_geometry: usize,
    pub aspects: Vec<f64>,
    pub families: Vec<FamilyReport>,
}

/// Random triangle with aspect ratio close to `aspect`: unit-scale base,
/// apex at relative height `1/aspect`, randomly placed, rotated and
/// reflected.
pub fn random_triangle(rng: &mut SplitMix64, aspect: f64) -> [Point2; 3] {
    let base = rng.range(0.5, 2.0);
    let height = base / aspect * rng.range(0.8, 1.2);
    let apex_x = rng.range(0.1, 0.9) * base;
    let theta = rng.range(0.0, std::f64::consts::TAU);
    let (sin, cos) = theta.sin_cos();
    let flip = if rng.next_f64() < 0.5 { 1.0 } else { -1.0 };
    let rot = |x: f64, y: f64| Point2::new(x * cos - y * sin, x * sin + y * cos);
    [
        rot(0.0, 0.0),
        rot(base, 0.0),
        rot(apex_x, flip * height),
    ]
}

/// Random polynomial of total degree at most 3, coefficients in [-1, 1].
pub fn random_poly(rng: &mut SplitMix64) -> TestFunction {
    let mut coeffs = [0.0; 10];
    for c in &mut coeffs {
        *c = rng.range(-1.0, 1.0);
    }
    TestFunction { coeffs }
}

/// Random nonnegative polynomial: square of a random linear plus an offset.
pub fn random_nonneg_poly(rng: &mut SplitMix64) -> TestFunction {
    let (a, b, c) = (
        rng.range(-1.0, 1.0),
        rng.range(-1.0, 1.0),
        rng.range(-1.0, 1.0),
    );
    let d = rng.range(0.0, 0.5);
    // (a + b x + c y)^2 + d
    let mut coeffs = [0.0; 10];
    coeffs[0] = a * a + d;
    coeffs[1] = 2.0 * a * b;
    coeffs[2] = 2.0 * a * c;
    coeffs[3] = b * b;
    coeffs[4] = 2.0 * b * c;
    coeffs[5] = c * c;
    TestFunction { coeffs }
}

/// Patch geometries exercised at a given aspect: strip patches of 4, 6 and
/// 8 triangles (one sheared into the quasi-non-obtuse regime) plus the
/// regular fan at aspect 1.
fn patch_geometries(aspect: f64) -> Vec<Triangulation> {
    let width = 1.0 / aspect;
    let mut out = Vec::new();
    for (k, obtuse) in [(4usize, 0.0), (6, 0.0), (8, 0.0), (6, 0.8)] {
        if let Ok(mesh) = generate_patch(1.0, width, k, PatchStyle::Strip, obtuse) {
            out.push(mesh);
        }
    }
    if aspect <= 1.5 {
        if let Ok(mesh) = generate_patch(1.0, 1.0, 6, PatchStyle::Fan, 0.0) {
            out.push(mesh);
        }
        if let Ok(mesh) = generate_patch(1.0, 1.0, 7, PatchStyle::Fan, 0.0) {
            out.push(mesh);
        }
    }
    out
}

/// All monomials of total degree <= 3.
pub fn monomials() -> Vec<TestFunction> {
    let mut v = Vec::new();
    for p in 0..=3u32 {
        for q in 0..=(3 - p) {
            v.push(TestFunction::monomial(p, q));
        }
    }
    v
}

fn update_worst(
    report: &mut FamilyReport,
    ratio: f64,
    aspect: f64,
    geometry: &[Point2],
    coeffs: &[f64],
) {
    if ratio > report.worst.ratio {
        report.worst = WorstCase {
            aspect,
            ratio,
            geometry: geometry.iter().map(|p| [p.x, p.y]).collect(),
            coeffs: coeffs.to_vec(),
        };
    }
}

fn empty_report(family: Family) -> FamilyReport {
    FamilyReport {
        family,
        count: 0,
        max_ratio: 0.0,
        aspect_slope: 0.0,
        per_aspect: Vec::new(),
        worst: WorstCase { aspect: 0.0, ratio: 0.0, geometry: Vec::new(), coeffs: Vec::new() },
        degenerate_samples: 0,
    }
}

fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(a, r)| a > 0.0 && r > 0.0)
        .map(|&(a, r)| (a.log10(), r.log10()))
        .collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-30 {
        return 0.0;
    }
    (n * sxy - sx * sy) / denom
}

fn record(report: &mut FamilyReport, aspect_max: &mut f64, r: &RatioReport, geometry: &[Point2], coeffs: &[f64]) {
    report.count += 1;
    if r.degenerate {
        report.degenerate_samples += 1;
        return;
    }
    *aspect_max = aspect_max.max(r.ratio);
    report.max_ratio = report.max_ratio.max(r.ratio);
    update_worst(report, r.ratio, r.aspect, geometry, coeffs);
}

/// Runs the requested families over the aspect sweep. `samples` random
/// polynomials are drawn per geometry in addition to all monomials of
/// degree at most 3. Deterministic in `seed`.
pub fn run_verification(
    families: &[Family],
    aspects: &[f64],
    samples: usize,
    seed: u64,
) -> VerificationReport {
    let mut reports: Vec<FamilyReport> =
        families.iter().map(|&f| empty_report(f)).collect();
    let mut per_aspect: Vec<Vec<(f64, f64)>> = vec![Vec::new(); families.len()];
    let class = ClassificationParams::default();

    for &aspect in aspects {
        let mut rng = SplitMix64::new(seed ^ (aspect.to_bits().rotate_left(17)));
        let mut aspect_max = vec![0.0f64; families.len()];

        // triangle families: divergence identity and auxiliary bounds
        let tri_count = 40;
        for _ in 0..tri_count {
            let pts = random_triangle(&mut rng, aspect);
            let mut vs = monomials();
            for _ in 0..samples / 10 {
                vs.push(random_poly(&mut rng));
            }
            let mut nonneg = vec![TestFunction::constant(1.0)];
            for _ in 0..samples / 10 {
                nonneg.push(random_nonneg_poly(&mut rng));
            }
            for (fi, &family) in families.iter().enumerate() {
                match family {
                    Family::Divergence => {
                        for v in &vs {
                            for z_local in 0..3 {
                                let (lhs, rhs) =
                                    divergence_identity(pts, z_local, v).unwrap();
                                let scale = lhs.abs() + rhs.abs() + 1.0;
                                let ratio = (lhs - rhs).abs() / scale;
                                let rr = RatioReport {
                                    lhs,
                                    rhs,
                                    ratio,
                                    degenerate: false,
                                    aspect,
                                    case_tag: super::CaseTag::TriangleAux,
                                };
                                record(
                                    &mut reports[fi],
                                    &mut aspect_max[fi],
                                    &rr,
                                    &pts,
                                    &v.coeffs,
                                );
                            }
                        }
                    }
                    Family::AuxA | Family::AuxB => {
                        for v in &nonneg {
                            for z_local in 0..3 {
                                let rr = if family == Family::AuxA {
                                    check_aux_a(pts, z_local, v)
                                } else {
                                    check_aux_b(pts, z_local, v)
                                }
                                .unwrap();
                                record(
                                    &mut reports[fi],
                                    &mut aspect_max[fi],
                                    &rr,
                                    &pts,
                                    &v.coeffs,
                                );
                            }
                        }
                    }
                    _ => {}
                }
            }
        }

        // patch families: hat-weighted trace inequalities on both branches
        let needs_patches = families
            .iter()
            .any(|f| matches!(f, Family::TraceL1 | Family::TraceSq));
        if needs_patches {
            for mesh in patch_geometries(aspect) {
                let patch = node_patch(&mesh, 0, &class);
                let mut vs = monomials();
                for _ in 0..samples {
                    vs.push(random_poly(&mut rng));
                }
                let geometry: Vec<Point2> = mesh.points.clone();
                for v in &vs {
                    for &edge in &patch.interior_edges {
                        for (fi, &family) in families.iter().enumerate() {
                            let rr = match family {
                                Family::TraceL1 => {
                                    check_scaled_trace_l1(&mesh, &patch, v, edge).unwrap()
                                }
                                Family::TraceSq => {
                                    check_scaled_trace_sq(&mesh, &patch, v, edge).unwrap()
                                }
                                _ => continue,
                            };
                            record(
                                &mut reports[fi],
                                &mut aspect_max[fi],
                                &rr,
                                &geometry,
                                &v.coeffs,
                            );
                        }
                    }
                }
            }
        }

        for (fi, m) in aspect_max.iter().enumerate() {
            per_aspect[fi].push((aspect, *m));
        }
    }

    for (fi, report) in reports.iter_mut().enumerate() {
        report.per_aspect = per_aspect[fi].clone();
        report.aspect_slope = fit_slope(&report.per_aspect);
    }
    VerificationReport {
        seed,
        samples_per_geometry: samples,
        aspects: aspects.to_vec(),
        families: reports,
    }
}

/// Fuzz of the min-quotient inequality over log-uniform positive inputs;
/// returns the number of violations (expected: zero).
pub fn fuzz_min_inequality(count: usize, seed: u64) -> usize {
    let mut rng = SplitMix64::new(seed);
    let mut violations = 0;
    for _ in 0..count {
        let draw = |rng: &mut SplitMix64| 10f64.powf(rng.range(-6.0, 6.0));
        let (a, ap, b, bp) = (draw(&mut rng), draw(&mut rng), draw(&mut rng), draw(&mut rng));
        let (_, _, holds) = check_min_inequality(a, ap, b, bp).unwrap();
        if !holds {
            violations += 1;
        }
    }
    violations
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn splitmix_is_deterministic() {
        let mut a = SplitMix64::new(7);
        let mut b = SplitMix64::new(7);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
        let mut c = SplitMix64::new(8);
        assert_ne!(a.next_u64(), c.next_u64());
    }

    #[test]
    fn random_triangle_hits_requested_aspect() {
        let mut rng = SplitMix64::new(3);
        for aspect in [1.0, 100.0, 1e4] {
            for _ in 0..20 {
                let pts = random_triangle(&mut rng, aspect);
                let g = crate::mesh::TriangleGeometry::from_points(pts[0], pts[1], pts[2])
                    .unwrap();
                let got = g.aspect();
                assert!(
                    got > aspect / 4.0 && got < aspect * 4.0,
                    "aspect {got} target {aspect}"
                );
            }
        }
    }

    #[test]
    fn nonneg_polys_are_nonneg() {
        let mut rng = SplitMix64::new(11);
        for _ in 0..50 {
            let v = random_nonneg_poly(&mut rng);
            for _ in 0..50 {
                let (x, y) = (rng.range(-2.0, 2.0), rng.range(-2.0, 2.0));
                assert!(v.eval(x, y) >= -1e-12);
            }
        }
    }

    #[test]
    fn verification_report_is_seed_deterministic() {
        let fams = [Family::Divergence, Family::TraceL1];
        let a = run_verification(&fams, &[1.0, 10.0], 5, 42);
        let b = run_verification(&fams, &[1.0, 10.0], 5, 42);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn min_inequality_fuzz_has_no_violations() {
        assert_eq!(fuzz_min_inequality(10_000, 1), 0);
    }
}
