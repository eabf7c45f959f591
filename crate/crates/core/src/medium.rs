//! Anisotropic permittivities, deformed distances and normals, and the
//! propagating cone of a hyperbolic medium.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::{branch_sqrt, branch_sqrt_unchecked};
use crate::Vec2;

/// Principal permittivities `(ε₁, ε₂)` of one homogeneous medium, so that
/// `A⁻¹ = diag(ε₁, ε₂)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialPair {
    pub eps1: Complex64,
    pub eps2: Complex64,
}

/// Boundary lines `x₂ = ±slope·x₁` of the propagating cone.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConeData {
    pub slope: f64,
    pub hyperbolic: bool,
}

impl MaterialPair {
    /// Validates finiteness, non-negative losses and non-zero components.
    pub fn new(eps1: Complex64, eps2: Complex64) -> Result<Self> {
        for (name, e) in [("eps1", eps1), ("eps2", eps2)] {
            if !e.re.is_finite() || !e.im.is_finite() {
                return Err(Error::Material(format!("{name} = {e} is not finite")));
            }
            if e.im < 0.0 {
                return Err(Error::Material(format!(
                    "{name} = {e} has negative imaginary part (gain medium)"
                )));
            }
            if e.norm() == 0.0 {
                return Err(Error::Material(format!("{name} is zero")));
            }
        }
        Ok(Self { eps1, eps2 })
    }

    pub fn isotropic(eps: Complex64) -> Result<Self> {
        Self::new(eps, eps)
    }

    pub fn vacuum() -> Self {
        let one = Complex64::new(1.0, 0.0);
        Self { eps1: one, eps2: one }
    }

    /// `Re ε₁ · Re ε₂ < 0`.
    pub fn is_hyperbolic(&self) -> bool {
        self.eps1.re * self.eps2.re < 0.0
    }

    /// `√(ε₁ε₂)` with the branch-cut square root of the product.
    pub fn sqrt_eps_product(&self) -> Result<Complex64> {
        branch_sqrt(self.eps1 * self.eps2)
    }

    /// `r̃ = √(ε₁dx₁² + ε₂dx₂²)`.
    pub fn deformed_distance(&self, dx: Vec2) -> Result<Complex64> {
        if dx[0] == 0.0 && dx[1] == 0.0 {
            return Err(Error::Coincident { x: 0.0, y: 0.0 });
        }
        branch_sqrt(self.eps1 * (dx[0] * dx[0]) + self.eps2 * (dx[1] * dx[1]))
    }

    #[inline]
    pub(crate) fn deformed_distance_unchecked(&self, dx: Vec2) -> Complex64 {
        branch_sqrt_unchecked(self.eps1 * (dx[0] * dx[0]) + self.eps2 * (dx[1] * dx[1]))
    }

    /// `ν̃ = Aν = (ν₁/ε₁, ν₂/ε₂)`.
    pub fn deformed_normal(&self, nu: Vec2) -> [Complex64; 2] {
        [nu[0] / self.eps1, nu[1] / self.eps2]
    }

    /// `arctan √(−Re ε₁ / Re ε₂)`.
    pub fn half_cone_angle(&self) -> Result<f64> {
        if !self.is_hyperbolic() {
            return Err(Error::Material(format!(
                "half cone angle requested for non-hyperbolic medium ({}, {})",
                self.eps1, self.eps2
            )));
        }
        Ok((-self.eps1.re / self.eps2.re).sqrt().atan())
    }

    /// Cone of `xᵀ(Re A)⁻¹x > 0` with `Re A = diag(Re 1/ε₁, Re 1/ε₂)`.
    pub fn cone(&self) -> ConeData {
        let a11 = 1.0 / (1.0 / self.eps1).re;
        let a22 = 1.0 / (1.0 / self.eps2).re;
        if a11.is_finite() && a22.is_finite() && a11 * a22 < 0.0 {
            ConeData {
                slope: (-a11 / a22).sqrt(),
                hyperbolic: true,
            }
        } else {
            ConeData {
                slope: 0.0,
                hyperbolic: false,
            }
        }
    }

    /// Euclidean distance from `dx` to the cone boundary; `f64::INFINITY`
    /// when the medium has no cone.
    pub fn cone_boundary_distance(&self, dx: Vec2) -> f64 {
        self.cone().boundary_distance(dx)
    }
}

impl ConeData {
    /// Unit normals of the two boundary lines through the origin.
    pub fn line_normals(&self) -> [Vec2; 2] {
        let n = (1.0 + self.slope * self.slope).sqrt();
        [[self.slope / n, -1.0 / n], [self.slope / n, 1.0 / n]]
    }

    pub fn boundary_distance(&self, dx: Vec2) -> f64 {
        if !self.hyperbolic {
            return f64::INFINITY;
        }
        self.line_normals()
            .iter()
            .map(|n| (n[0] * dx[0] + n[1] * dx[1]).abs())
            .fold(f64::INFINITY, f64::min)
    }

    /// Exact distance from the convex polygon with the given corners to the
    /// cone boundary.
    pub fn polygon_distance(&self, corners: &[Vec2]) -> f64 {
        if !self.hyperbolic {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        for n in self.line_normals() {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for c in corners {
                let d = n[0] * c[0] + n[1] * c[1];
                lo = lo.min(d);
                hi = hi.max(d);
            }
            let d = if lo <= 0.0 && hi >= 0.0 {
                0.0
            } else {
                lo.abs().min(hi.abs())
            };
            best = best.min(d);
        }
        best
    }
}
