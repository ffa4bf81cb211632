//! P1 finite elements on anisotropic triangulations of the unit square,
//! with residual a posteriori error estimation in the energy norm for
//! singularly perturbed reaction-diffusion problems
//! `-eps^2 laplace(u) + f(x,y;u) = 0`, `u = 0` on the boundary.
//!
//! The crate is organized around five building blocks:
//!
//! * [`mesh`] — triangulation kernel: topology, node patches, anisotropy
//!   classification, quality validation, generators and JSON I/O;
//! * [`quadrature`] — fixed-degree rules on triangles, edges and patches,
//!   plus composite variants that resolve boundary-layer integrands;
//! * [`fem`] — assembly and solution of the discrete scheme, gradient
//!   jumps, energy norms and manufactured solutions;
//! * [`estimator`] — the per-node jump/interior/quadrature residual
//!   estimator under three jump-weight schemes;
//! * [`analysis`] — numerical verification of the scaled trace
//!   inequalities, the divergence identity, patch averages and the error
//!   representation that justify the estimator weights.

#![allow(clippy::needless_range_loop)] // index loops mirror the math

pub mod analysis;
pub mod estimator;
pub mod fem;
pub mod mesh;
pub mod quadrature;
