//! Adaptive Galerkin boundary element solver for the two-dimensional TM
//! transmission problem between a hyperbolic metamaterial and an isotropic or
//! hyperbolic exterior medium.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`]: branch-cut square root and Hankel functions of complex argument.
//! * [`medium`]: permittivity pairs, deformed distances/normals and propagating cones.
//! * [`geometry`]: closed boundary curves, meshes and bisection refinement.
//! * [`kernels`]: fundamental solutions, their conormal derivatives, point sources
//!   and field evaluation by the representation formulas.
//! * [`quadrature`]: Gauss/Lobatto rules, the recursive adaptive Lobatto scheme and
//!   singular/near-singular pair integration.
//! * [`assembly`]: Galerkin blocks `N`, `K`, `S`, `I` and the right-hand side.
//! * [`linalg`]: dense complex LU.
//! * [`adapt`]: two-level error indicators, Dörfler marking and the adaptive driver.
//! * [`reference`]: fine uniform-mesh reference solutions and relative trace errors.
//! * [`config`] and [`run`]: problem configuration files and run orchestration.

pub mod adapt;
pub mod assembly;
pub mod config;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod medium;
pub mod quadrature;
pub mod reference;
pub mod run;
pub mod specfun;

pub use error::{Error, Result};
pub use num_complex::Complex64;

/// Points and vectors in the plane.
pub type Vec2 = [f64; 2];
