//! Fundamental solutions of `∇·A∇u + k₀²u = −δ`, their conormal
//! derivatives, point sources and field evaluation by the representation
//! formulas.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::assembly::SolutionPair;
use crate::error::{Error, Result};
use crate::geometry::Mesh;
use crate::medium::MaterialPair;
use crate::quadrature::{element_integral, gauss, AdaptiveBudget};
use crate::specfun::{hankel1_0, hankel1_01_unchecked};
use crate::Vec2;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Kernel data of one medium: `Φ(x,y) = (i/4)√(ε₁ε₂) H₀⁽¹⁾(k₀ r̃)`.
///
/// With `k0 = 0` the context represents the static kernel
/// `Φ₀ = −(√(ε₁ε₂)/2π) ln r̃`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelContext {
    mat: MaterialPair,
    k0: f64,
    sqrt_eps: Complex64,
    prefactor: Complex64,
}

impl KernelContext {
    pub fn new(mat: MaterialPair, k0: f64) -> Result<Self> {
        if !(k0 >= 0.0 && k0.is_finite()) {
            return Err(Error::Validation(format!(
                "wavenumber must be finite and non-negative, got {k0}"
            )));
        }
        let sqrt_eps = mat.sqrt_eps_product()?;
        Ok(Self {
            mat,
            k0,
            sqrt_eps,
            prefactor: 0.25 * I * sqrt_eps,
        })
    }

    /// Static (`k₀ = 0`) kernel of the medium.
    pub fn static_kernel(mat: MaterialPair) -> Result<Self> {
        Self::new(mat, 0.0)
    }

    pub fn material(&self) -> &MaterialPair {
        &self.mat
    }

    pub fn k0(&self) -> f64 {
        self.k0
    }

    /// `√(ε₁ε₂)`.
    pub fn sqrt_eps(&self) -> Complex64 {
        self.sqrt_eps
    }

    /// `(i/4)√(ε₁ε₂)`.
    pub fn prefactor(&self) -> Complex64 {
        self.prefactor
    }

    pub fn is_static(&self) -> bool {
        self.k0 == 0.0
    }

    /// Largest `|k₀ √ε|` over the principal directions, a bound on the
    /// kernel's oscillation rate.
    pub fn max_wavenumber(&self) -> f64 {
        self.k0 * self.mat.eps1.norm().sqrt().max(self.mat.eps2.norm().sqrt())
    }

    fn check(x: Vec2, y: Vec2) -> Result<Vec2> {
        let dx = [x[0] - y[0], x[1] - y[1]];
        if dx[0] == 0.0 && dx[1] == 0.0 {
            return Err(Error::Coincident { x: x[0], y: x[1] });
        }
        Ok(dx)
    }

    /// `Φ` as a function of the deformed distance.
    #[inline]
    pub(crate) fn phi_of_r(&self, r: Complex64) -> Complex64 {
        if self.is_static() {
            -self.sqrt_eps / (2.0 * PI) * r.ln()
        } else {
            self.prefactor * hankel1_01_unchecked(self.k0 * r).0
        }
    }

    /// `(Φ, g)` with `∂Φ/∂ν̃(y) = g·((x−y)·ν(y))` and
    /// `∂Φ/∂ν̃(x) = −g·((x−y)·ν(x))`, for `dx = x − y ≠ 0`.
    #[inline]
    pub(crate) fn eval(&self, dx: Vec2) -> (Complex64, Complex64) {
        let r = self.mat.deformed_distance_unchecked(dx);
        if self.is_static() {
            let c = self.sqrt_eps / (2.0 * PI);
            (-c * r.ln(), c / (r * r))
        } else {
            let (h0, h1) = hankel1_01_unchecked(self.k0 * r);
            (self.prefactor * h0, self.prefactor * self.k0 * h1 / r)
        }
    }

    /// `Φ(x, y)`.
    pub fn phi(&self, x: Vec2, y: Vec2) -> Result<Complex64> {
        let dx = Self::check(x, y)?;
        if self.is_static() {
            return Ok(self.eval(dx).0);
        }
        let r = self.mat.deformed_distance(dx)?;
        Ok(self.prefactor * hankel1_0(self.k0 * r)?)
    }

    /// `∂Φ(x,y)/∂ν̃(y)` with `ν̃ = Aν`.
    pub fn dphi_dnu_y(&self, x: Vec2, y: Vec2, nu_y: Vec2) -> Result<Complex64> {
        let dx = Self::check(x, y)?;
        self.mat.deformed_distance(dx)?;
        let (_, g) = self.eval(dx);
        Ok(g * (dx[0] * nu_y[0] + dx[1] * nu_y[1]))
    }

    /// `∂Φ(x,y)/∂ν̃(x)`.
    pub fn dphi_dnu_x(&self, x: Vec2, y: Vec2, nu_x: Vec2) -> Result<Complex64> {
        let dx = Self::check(x, y)?;
        self.mat.deformed_distance(dx)?;
        let (_, g) = self.eval(dx);
        Ok(-g * (dx[0] * nu_x[0] + dx[1] * nu_x[1]))
    }
}

/// `Φ₀(x,y) = −(√(ε₁ε₂)/2π) ln r̃(x,y)`.
pub fn phi_static(x: Vec2, y: Vec2, mat: &MaterialPair) -> Result<Complex64> {
    KernelContext::static_kernel(*mat)?.phi(x, y)
}

/// Side of the interface a point or source lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    /// The bounded metamaterial region `Ω₁`.
    Interior,
    /// The unbounded region `Ω₂`.
    Exterior,
}

impl Domain {
    pub fn id(self) -> u8 {
        match self {
            Domain::Interior => 1,
            Domain::Exterior => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Domain::Interior => "interior",
            Domain::Exterior => "exterior",
        }
    }
}

/// Volume source `f = amplitude·δ(· − location)` in one domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSource {
    pub location: Vec2,
    pub amplitude: Complex64,
    pub domain: Domain,
}

impl PointSource {
    /// Checks that the source lies strictly inside its domain, off the curve
    /// and off the discretized boundary.
    pub fn validate(&self, mesh: &Mesh) -> Result<()> {
        let x = self.location;
        let err = |reason: String| Error::Source {
            x: x[0],
            y: x[1],
            reason,
        };
        if !x[0].is_finite() || !x[1].is_finite() || !self.amplitude.re.is_finite() || !self.amplitude.im.is_finite() {
            return Err(err("non-finite location or amplitude".into()));
        }
        let inside = mesh.curve().contains(x);
        match (self.domain, inside) {
            (Domain::Interior, false) => return Err(err("declared interior but not inside the boundary".into())),
            (Domain::Exterior, true) => return Err(err("declared exterior but inside the boundary".into())),
            _ => {}
        }
        let d = mesh.curve().distance(x).min(mesh.nearest_element(x).1);
        if d <= 1e-12 * (1.0 + x[0].abs() + x[1].abs()) {
            return Err(err(format!("lies on the boundary (distance {d:e})")));
        }
        Ok(())
    }
}

/// Kernel contexts of the interior and exterior media.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MediumPair {
    pub interior: KernelContext,
    pub exterior: KernelContext,
}

impl MediumPair {
    pub fn new(interior: MaterialPair, exterior: MaterialPair, k0: f64) -> Result<Self> {
        Ok(Self {
            interior: KernelContext::new(interior, k0)?,
            exterior: KernelContext::new(exterior, k0)?,
        })
    }

    pub fn get(&self, d: Domain) -> &KernelContext {
        match d {
            Domain::Interior => &self.interior,
            Domain::Exterior => &self.exterior,
        }
    }

    pub fn materials(&self) -> [MaterialPair; 2] {
        [*self.interior.material(), *self.exterior.material()]
    }
}

/// Pointwise boundary data `(g⁽¹⁾(x), g⁽²⁾(x))` of the source at a boundary
/// point `x` with normal `ν`:
/// `g⁽¹⁾ = −c·∂Φ_j(x,x₀)/∂ν̃_j(x)` and `g⁽²⁾ = −c·Φ_j(x,x₀)` for the medium `j`
/// containing the source.
#[inline]
pub fn source_traces(src: &PointSource, media: &MediumPair, x: Vec2, nu: Vec2) -> (Complex64, Complex64) {
    if src.amplitude == Complex64::new(0.0, 0.0) {
        return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let ctx = media.get(src.domain);
    let dx = [x[0] - src.location[0], x[1] - src.location[1]];
    let (phi, g) = ctx.eval(dx);
    let dn = -g * (dx[0] * nu[0] + dx[1] * nu[1]);
    (-src.amplitude * dn, -src.amplitude * phi)
}

/// Source traces at the `n`-point Gauss nodes of every element, returned as
/// `values[element][node] = (g⁽¹⁾, g⁽²⁾)`.
pub fn source_trace_g(
    mesh: &Mesh,
    src: &PointSource,
    media: &MediumPair,
    n: usize,
) -> Result<Vec<Vec<(Complex64, Complex64)>>> {
    src.validate(mesh)?;
    let rule = gauss(n);
    Ok(mesh
        .elements()
        .iter()
        .map(|e| {
            rule.nodes
                .iter()
                .map(|&u| source_traces(src, media, e.map(u), e.normal))
                .collect()
        })
        .collect())
}

/// Field value with the accuracy flag of the evaluation contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldValue {
    pub value: Complex64,
    /// Set when the point is closer to the boundary than its nearest element
    /// length, where the boundary quadrature is not reliable.
    pub low_accuracy: bool,
}

/// Field at `x` from the representation formulas:
/// `u₁ = S₁φ⁽²⁾ − K₁φ⁽¹⁾ − P₁f₁` in `Ω₁` and `u₂ = K₂φ⁽¹⁾ − S₂φ⁽²⁾ − P₂f₂` in `Ω₂`.
pub fn eval_field(
    x: Vec2,
    sol: &SolutionPair,
    src: &PointSource,
    media: &MediumPair,
    domain: Domain,
    tau: f64,
) -> Result<FieldValue> {
    let mesh = &sol.mesh;
    if sol.c1.len() != mesh.len() || sol.c2.len() != mesh.len() {
        return Err(Error::Dimension(format!(
            "solution has {}/{} coefficients for a mesh of {} elements",
            sol.c1.len(),
            sol.c2.len(),
            mesh.len()
        )));
    }
    let inside = mesh.curve().contains(x);
    if inside != (domain == Domain::Interior) {
        return Err(Error::Validation(format!(
            "point ({}, {}) is not in the {} domain",
            x[0],
            x[1],
            domain.name()
        )));
    }
    let (near, d) = mesh.nearest_element(x);
    if d == 0.0 {
        return Err(Error::Coincident { x: x[0], y: x[1] });
    }
    let low_accuracy = d < mesh.element(near).length;
    let ctx = media.get(domain);
    let budget = AdaptiveBudget {
        rel_tol: 1e-10,
        abs_tol: 1e-15,
        max_depth: 40,
    };
    let mut single = Complex64::new(0.0, 0.0);
    let mut double = Complex64::new(0.0, 0.0);
    for (m, e) in mesh.elements().iter().enumerate() {
        let (a, b) = mesh.element_nodes(m);
        let (c_a, c_b, c2) = (sol.c1[a], sol.c1[b], sol.c2[m]);
        let half = 0.5 * e.length;
        let r = element_integral(e, x, ctx.material(), tau, ctx.max_wavenumber(), &budget, |u, y| {
            let dx = [x[0] - y[0], x[1] - y[1]];
            let (phi, g) = ctx.eval(dx);
            let dphi = g * (dx[0] * e.normal[0] + dx[1] * e.normal[1]);
            let phi1 = c_a * (0.5 * (1.0 - u)) + c_b * (0.5 * (1.0 + u));
            [phi * c2 * half, dphi * phi1 * half]
        });
        single += r.value[0];
        double += r.value[1];
    }
    let mut value = match domain {
        Domain::Interior => single - double,
        Domain::Exterior => double - single,
    };
    if src.domain == domain && src.amplitude != Complex64::new(0.0, 0.0) {
        value -= src.amplitude * ctx.phi(x, src.location)?;
    }
    Ok(FieldValue { value, low_accuracy })
}
