//! Mesh generators: uniform criss-cross squares, layer-adapted Shishkin
//! tensor meshes, and isolated single-node patches for inequality fuzzing.

use serde::{Deserialize, Serialize};

use super::{build_triangulation, MeshError, Point2, Triangulation};

/// Uniform criss-cross mesh of the unit square with `n` cells per side and
/// all diagonals in one direction: `(n+1)^2` nodes, `2 n^2` triangles.
pub fn generate_uniform(n: usize) -> Result<Triangulation, MeshError> {
    if n < 1 {
        return Err(MeshError::InvalidParams("uniform: n >= 1 required".into()));
    }
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    tensor_mesh(&xs, &xs)
}

/// Shishkin mesh for a boundary layer along `x = 0`: the interval `[0, tau]`
/// with `tau = min(1/2, sigma * epsilon * ln n)` carries `n/2` uniform cells,
/// `[tau, 1]` the remaining `n/2`; the `y`-mesh is uniform. All triangles are
/// axis-aligned right triangles, so their maximum angle is exactly `pi/2` and
/// every shortest edge lies on a tensor mesh line.
pub fn generate_shishkin(n: usize, epsilon: f64, sigma: f64) -> Result<Triangulation, MeshError> {
    if n < 4 || !n.is_multiple_of(2) {
        return Err(MeshError::InvalidParams(
            "shishkin: n must be even and >= 4".into(),
        ));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(MeshError::InvalidParams(
            "shishkin: epsilon must lie in (0, 1]".into(),
        ));
    }
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(MeshError::InvalidParams("shishkin: sigma > 0 required".into()));
    }
    let tau = (sigma * epsilon * (n as f64).ln()).min(0.5);
    let half = n / 2;
    let mut xs = Vec::with_capacity(n + 1);
    for i in 0..=half {
        xs.push(tau * i as f64 / half as f64);
    }
    for i in 1..=half {
        xs.push(tau + (1.0 - tau) * i as f64 / half as f64);
    }
    let ys: Vec<f64> = (0..=n).map(|j| j as f64 / n as f64).collect();
    tensor_mesh(&xs, &ys)
}

/// Tensor-product triangulation over the given sorted coordinate lines,
/// each cell split by the diagonal from its lower-left to upper-right node.
fn tensor_mesh(xs: &[f64], ys: &[f64]) -> Result<Triangulation, MeshError> {
    let nx = xs.len();
    let mut points = Vec::with_capacity(nx * ys.len());
    for &y in ys {
        for &x in xs {
            points.push(Point2::new(x, y));
        }
    }
    let mut tris = Vec::with_capacity(2 * (nx - 1) * (ys.len() - 1));
    for j in 0..ys.len() - 1 {
        for i in 0..nx - 1 {
            let a = j * nx + i;
            let b = a + 1;
            let c = b + nx;
            let d = a + nx;
            tris.push([a, b, c]);
            tris.push([a, c, d]);
        }
    }
    build_triangulation(points, tris, None)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PatchStyle {
    /// Rim vertices on a (possibly squashed) regular polygon.
    Fan,
    /// Thin axis-aligned patch with two short star edges, mimicking a row
    /// of anisotropic elements around an interior node.
    Strip,
}

/// Isolated patch mesh: a single interior node at the origin whose patch is
/// the whole mesh, with diameter close to `h_diam` and `area/diameter` close
/// to `width`. `obtuseness` shears the patch so the largest angles grow to
/// roughly `pi/2 + obtuseness * h_T / H_T`.
pub fn generate_patch(
    h_diam: f64,
    width: f64,
    n_triangles: usize,
    style: PatchStyle,
    obtuseness: f64,
) -> Result<Triangulation, MeshError> {
    if !(width > 0.0 && h_diam >= width) {
        return Err(MeshError::InvalidParams(
            "patch: need 0 < h <= H".into(),
        ));
    }
    let rim: Vec<Point2> = match style {
        PatchStyle::Fan => {
            if n_triangles < 3 {
                return Err(MeshError::InvalidParams("fan: need >= 3 triangles".into()));
            }
            let k = n_triangles;
            let a = h_diam / 2.0;
            // semi-minor axis so that area/diameter comes out near `width`,
            // clamped at the regular polygon (isotropic limit)
            let b = (4.0 * width / (k as f64 * (2.0 * std::f64::consts::PI / k as f64).sin()))
                .min(a);
            (0..k)
                .map(|j| {
                    let th = 2.0 * std::f64::consts::PI * j as f64 / k as f64;
                    Point2::new(a * th.cos(), b * th.sin())
                })
                .collect()
        }
        PatchStyle::Strip => {
            if n_triangles < 4 || !n_triangles.is_multiple_of(2) {
                return Err(MeshError::InvalidParams(
                    "strip: need an even number >= 4 of triangles".into(),
                ));
            }
            let k = n_triangles;
            let l = h_diam / 2.0;
            if k == 4 {
                // diamond: patch area 2*l*delta, diameter 2l
                let delta = width;
                vec![
                    Point2::new(l, 0.0),
                    Point2::new(0.0, delta),
                    Point2::new(-l, 0.0),
                    Point2::new(0.0, -delta),
                ]
            } else {
                // slivers stacked on the two end caps plus one short star
                // edge above and below z; patch area 4*l*delta
                let delta = width / 2.0;
                let m = (k - 4) / 2;
                let mut rim = Vec::with_capacity(k);
                for j in 0..=m {
                    rim.push(Point2::new(l, -delta + 2.0 * delta * j as f64 / m as f64));
                }
                rim.push(Point2::new(0.0, delta));
                for j in 0..=m {
                    rim.push(Point2::new(-l, delta - 2.0 * delta * j as f64 / m as f64));
                }
                rim.push(Point2::new(0.0, -delta));
                rim
            }
        }
    };

    let mut points = vec![Point2::new(0.0, 0.0)];
    points.extend(rim.iter().copied());
    if obtuseness != 0.0 {
        // area-preserving shear; tilts right angles by atan(kappa)
        let kappa = (obtuseness * width / h_diam).tan();
        for p in &mut points {
            p.x += kappa * p.y;
        }
    }
    let k = rim.len();
    let tris: Vec<[usize; 3]> = (0..k).map(|j| [0, 1 + j, 1 + (j + 1) % k]).collect();
    build_triangulation(points, tris, None)
}
