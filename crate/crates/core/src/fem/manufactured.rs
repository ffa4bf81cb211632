//! Manufactured solutions with matched right-hand sides for the linear
//! reaction `f = u - F`: a smooth sine product and a two-sided 1-D
//! boundary-layer profile modulated smoothly in `y`.

use std::f64::consts::PI;

use super::{ExactSolution, ProblemSpec, Reaction};
use crate::quadrature::geometric_breaks;

/// Smooth benchmark: `u = sin(pi x) sin(pi y)`, reaction `f = u - F` with
/// `F = (2 pi^2 eps^2 + 1) u`.
pub fn manufactured_sinsin(epsilon: f64) -> ProblemSpec {
    let u = move |x: f64, y: f64| (PI * x).sin() * (PI * y).sin();
    let factor = 2.0 * PI * PI * epsilon * epsilon + 1.0;
    let reaction = Reaction::linear_const_c(1.0, move |x, y| factor * u(x, y));
    let exact = ExactSolution {
        u: Box::new(u),
        grad: Box::new(|x, y| {
            (
                PI * (PI * x).cos() * (PI * y).sin(),
                PI * (PI * x).sin() * (PI * y).cos(),
            )
        }),
        laplacian: Some(Box::new(move |x, y| -2.0 * PI * PI * u(x, y))),
        // eps^2 ||grad u||^2 + ||u||^2 = eps^2 pi^2/2 + 1/4
        energy_sq: Some(epsilon * epsilon * PI * PI / 2.0 + 0.25),
        x_breaks: None,
    };
    ProblemSpec::new(epsilon, reaction, 1.0)
        .expect("valid parameters")
        .with_exact(exact)
}

/// Boundary-layer benchmark: `u = v(x) sin(pi y)` with
/// `v = e^(-x/eps) + e^(-(1-x)/eps) - 1 - e^(-1/eps)`, which solves
/// `-eps^2 v'' + v = -(1 + e^(-1/eps))` with `v(0) = v(1) = 0`. The matched
/// right-hand side for `f = u - F` is
/// `F = (-(1 + e^(-1/eps)) + eps^2 pi^2 v(x)) sin(pi y)`.
pub fn manufactured_layer1d(epsilon: f64) -> ProblemSpec {
    let eps = epsilon;
    let c1 = 1.0 + (-1.0 / eps).exp();
    let v = move |x: f64| (-x / eps).exp() + (-(1.0 - x) / eps).exp() - c1;
    let dv = move |x: f64| (-(-x / eps).exp() + (-(1.0 - x) / eps).exp()) / eps;
    let d2v = move |x: f64| ((-x / eps).exp() + (-(1.0 - x) / eps).exp()) / (eps * eps);

    let reaction =
        Reaction::linear_const_c(1.0, move |x, y| (-c1 + eps * eps * PI * PI * v(x)) * (PI * y).sin());

    // closed-form 1-D integrals of v^2 and v'^2 on (0, 1)
    let e1 = (-1.0 / eps).exp();
    let e2 = (-2.0 / eps).exp();
    let int_v2 = eps * (1.0 - e2) + c1 * c1 + 2.0 * e1 - 4.0 * c1 * eps * (1.0 - e1);
    let int_dv2 = (eps * (1.0 - e2) - 2.0 * e1) / (eps * eps);
    // ||u||^2 = int_v2 / 2, ||u_x||^2 = int_dv2 / 2, ||u_y||^2 = pi^2 int_v2 / 2
    let energy_sq =
        eps * eps * (int_dv2 / 2.0 + PI * PI * int_v2 / 2.0) + int_v2 / 2.0;

    let exact = ExactSolution {
        u: Box::new(move |x, y| v(x) * (PI * y).sin()),
        grad: Box::new(move |x, y| {
            (dv(x) * (PI * y).sin(), PI * v(x) * (PI * y).cos())
        }),
        laplacian: Some(Box::new(move |x, y| {
            (d2v(x) - PI * PI * v(x)) * (PI * y).sin()
        })),
        energy_sq: Some(energy_sq),
        x_breaks: Some(geometric_breaks(0.0, 1.0, eps / 4.0)),
    };
    ProblemSpec::new(epsilon, reaction, 1.0)
        .expect("valid parameters")
        .with_exact(exact)
}
