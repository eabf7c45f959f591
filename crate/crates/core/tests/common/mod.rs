//! Independent brute-force quadrature shared by the oracle tests: its own
//! Gauss–Legendre nodes, iterated adaptive bisection with no depth cap in
//! practice, and entry assembly straight from the operator definitions.

#![allow(dead_code)]

use hyperbem::assembly::SolutionPair;
use hyperbem::geometry::{Curve, Element, Mesh};
use hyperbem::kernels::{KernelContext, MediumPair};
use hyperbem::medium::MaterialPair;
use hyperbem::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Example-1 interior medium.
pub fn ex1_material() -> MaterialPair {
    MaterialPair::new(c(1.0, 0.02), c(-2.0, 0.02)).unwrap()
}

/// Gauss–Legendre nodes and weights by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    // `(P_n(z), P_n'(z))` by the three-term recurrence.
    let legendre = |z: f64| {
        let (mut p0, mut p1) = (1.0, z);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
    };
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() <= 1e-15 * z.abs().max(1e-3) {
                break;
            }
        }
        let (_, dp) = legendre(z);
        x[i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

fn max_norm<const K: usize>(v: &[Complex64; K]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub struct Bisection {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: usize,
    pub evaluations: usize,
    floor: f64,
}

impl Bisection {
    pub fn new(rel_tol: f64, abs_tol: f64) -> Self {
        let (nodes, weights) = gauss_legendre(10);
        Self {
            nodes,
            weights,
            rel_tol,
            abs_tol,
            max_depth: 60,
            evaluations: 0,
            floor: 0.0,
        }
    }

    pub fn panel<const K: usize>(
        &mut self,
        f: &mut impl FnMut(f64) -> [Complex64; K],
        a: f64,
        b: f64,
    ) -> [Complex64; K] {
        let (h, m) = (0.5 * (b - a), 0.5 * (a + b));
        let mut acc = [Complex64::new(0.0, 0.0); K];
        for (&u, &w) in self.nodes.iter().zip(&self.weights) {
            let v = f(m + h * u);
            for k in 0..K {
                acc[k] += v[k] * (w * h);
            }
        }
        self.evaluations += self.nodes.len();
        acc
    }

    /// `∫_a^b f` by recursive bisection until halves and whole agree.
    ///
    /// A panel touching a logarithmic singularity has an error proportional
    /// to its width, so a width-scaled floor alone never stops there; the
    /// absolute floor `1e-2·rel_tol·|whole-interval estimate|` does, and only
    /// the bottom panel carries that error.
    pub fn integrate<const K: usize>(
        &mut self,
        f: &mut impl FnMut(f64) -> [Complex64; K],
        a: f64,
        b: f64,
    ) -> [Complex64; K] {
        let whole = self.panel(f, a, b);
        let floor = 1e-2 * self.rel_tol * max_norm(&whole);
        self.integrate_floor(f, a, b, floor)
    }

    /// [`Bisection::integrate`] with the absolute floor given, for pieces of a
    /// larger integral.
    pub fn integrate_floor<const K: usize>(
        &mut self,
        f: &mut impl FnMut(f64) -> [Complex64; K],
        a: f64,
        b: f64,
        floor: f64,
    ) -> [Complex64; K] {
        let whole = self.panel(f, a, b);
        self.floor = floor;
        self.refine(f, a, b, whole, 0)
    }

    fn refine<const K: usize>(
        &mut self,
        f: &mut impl FnMut(f64) -> [Complex64; K],
        a: f64,
        b: f64,
        whole: [Complex64; K],
        depth: usize,
    ) -> [Complex64; K] {
        let m = 0.5 * (a + b);
        let l = self.panel(f, a, m);
        let r = self.panel(f, m, b);
        let mut sum = l;
        let mut diff: f64 = 0.0;
        let mut size: f64 = 0.0;
        for k in 0..K {
            sum[k] += r[k];
            diff = diff.max((sum[k] - whole[k]).norm());
            size = size.max(sum[k].norm());
        }
        if diff <= (self.rel_tol * size).max(self.abs_tol * (b - a)).max(self.floor) || depth >= self.max_depth {
            return sum;
        }
        let mut left = self.refine(f, a, m, l, depth + 1);
        let right = self.refine(f, m, b, r, depth + 1);
        for k in 0..K {
            left[k] += right[k];
        }
        left
    }
}

/// Per-medium pair integrals in parameter space (`t` on the test element,
/// `s` on the trial element, Jacobian included):
/// `[I_00, I_01, I_10, I_11, Jy_0, Jy_1, Jx_0, Jx_1]` with
/// `I_ab = ∫∫ Φ hat_a(s) hat_b(t)`, `Jy_a = ∫∫ ∂Φ/∂ν̃(y) hat_a(s)`,
/// `Jx_b = ∫∫ ∂Φ/∂ν̃(x) hat_b(t)`.
pub fn brute_pair(ctx: &KernelContext, e: &Element, f: &Element, same: bool, bis: &mut Bisection) -> [Complex64; 8] {
    let hats = |u: f64| [0.5 * (1.0 - u), 0.5 * (1.0 + u)];
    let jac = 0.25 * e.length * f.length;
    // The inner rule must be well below the outer tolerance, or the outer
    // bisection chases quadrature noise.
    let (rel_tol, abs_tol) = (bis.rel_tol * 1e-2, bis.abs_tol * 1e-2);
    let mut inner_evals = 0;
    // `x − y` is formed from offsets to the closest pair of endpoints, so it
    // keeps full relative accuracy next to a shared node; the kernel only
    // sees the difference, passed as `(x − y, 0)`.
    let (pe, ae, pf, af) = closest_ends(e, f, same);
    let de = [e.end[0] - e.start[0], e.end[1] - e.start[1]];
    let df = [f.end[0] - f.start[0], f.end[1] - f.start[1]];
    let gap = [pe[0] - pf[0], pe[1] - pf[1]];
    let offset = |u: f64, at_end: bool| if at_end { 0.5 * (u - 1.0) } else { 0.5 * (u + 1.0) };
    let origin = [0.0, 0.0];
    let mut outer = |t: f64| -> [Complex64; 8] {
        let ot = offset(t, ae);
        let lb = hats(t);
        let mut inner = |s: f64| -> [Complex64; 8] {
            let os = offset(s, af);
            let x = [gap[0] + ot * de[0] - os * df[0], gap[1] + ot * de[1] - os * df[1]];
            let y = origin;
            let la = hats(s);
            let phi = ctx.phi(x, y).unwrap();
            // On one flat element (x − y)·ν is zero, and evaluating it would
            // only divide rounding noise by r̃².
            let (dy, dx) = if same {
                (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0))
            } else {
                (
                    ctx.dphi_dnu_y(x, y, f.normal).unwrap(),
                    ctx.dphi_dnu_x(x, y, e.normal).unwrap(),
                )
            };
            [
                phi * la[0] * lb[0],
                phi * la[0] * lb[1],
                phi * la[1] * lb[0],
                phi * la[1] * lb[1],
                dy * la[0],
                dy * la[1],
                dx * lb[0],
                dx * lb[1],
            ]
        };
        let mut inner_bis = Bisection::new(rel_tol, abs_tol);
        let v = if same {
            // Both pieces share the floor of the whole element.
            let mut scale = inner_bis.panel(&mut inner, -1.0, t);
            let right = inner_bis.panel(&mut inner, t, 1.0);
            for k in 0..8 {
                scale[k] += right[k];
            }
            let floor = 1e-2 * rel_tol * max_norm(&scale);
            let mut a = inner_bis.integrate_floor(&mut inner, -1.0, t, floor);
            let b = inner_bis.integrate_floor(&mut inner, t, 1.0, floor);
            for k in 0..8 {
                a[k] += b[k];
            }
            a
        } else {
            inner_bis.integrate(&mut inner, -1.0, 1.0)
        };
        inner_evals += inner_bis.evaluations;
        v
    };
    let mut v = bis.integrate(&mut outer, -1.0, 1.0);
    bis.evaluations += inner_evals;
    for z in v.iter_mut() {
        *z *= jac;
    }
    v
}

/// The endpoints of `e` and `f` closest to each other, with flags telling
/// whether each is the element's end (`u = +1`).
fn closest_ends(e: &Element, f: &Element, same: bool) -> ([f64; 2], bool, [f64; 2], bool) {
    if same {
        return (e.start, false, f.start, false);
    }
    let mut best = (f64::INFINITY, (e.start, false, f.start, false));
    for (p, a) in [(e.start, false), (e.end, true)] {
        for (q, b) in [(f.start, false), (f.end, true)] {
            let d = (p[0] - q[0]).hypot(p[1] - q[1]);
            if d < best.0 {
                best = (d, (p, a, q, b));
            }
        }
    }
    best.1
}

/// Dense blocks `S`, `K`, `K′`, `N` of `Σ_j sign_j (operator_j)` assembled
/// entry by entry from brute-force pair integrals.
pub struct BruteBlocks {
    pub s: Vec<Vec<Complex64>>,
    pub k: Vec<Vec<Complex64>>,
    pub k_prime: Vec<Vec<Complex64>>,
    pub n: Vec<Vec<Complex64>>,
    pub evaluations: usize,
}

pub fn brute_blocks(mesh: &Mesh, terms: &[(&KernelContext, f64)], rel_tol: f64) -> BruteBlocks {
    let m = mesh.len();
    let zero = || vec![vec![Complex64::new(0.0, 0.0); m]; m];
    let mut out = BruteBlocks {
        s: zero(),
        k: zero(),
        k_prime: zero(),
        n: zero(),
        evaluations: 0,
    };
    for ei in 0..m {
        for fi in 0..m {
            let e = mesh.element(ei);
            let f = mesh.element(fi);
            let en = mesh.element_nodes(ei);
            let fnodes = mesh.element_nodes(fi);
            let (en, fnodes) = ([en.0, en.1], [fnodes.0, fnodes.1]);
            let de = [-1.0 / e.length, 1.0 / e.length];
            let df = [-1.0 / f.length, 1.0 / f.length];
            for &(ctx, sign) in terms {
                let mut bis = Bisection::new(rel_tol, 1e-15);
                let v = brute_pair(ctx, e, f, ei == fi, &mut bis);
                out.evaluations += bis.evaluations;
                let mat = ctx.material();
                let total: Complex64 = v[..4].iter().sum();
                out.s[ei][fi] += total * sign;
                let q = f.normal[0] * e.normal[0] / mat.eps1 + f.normal[1] * e.normal[1] / mat.eps2;
                let inv = 1.0 / (mat.eps1 * mat.eps2);
                let k2 = ctx.k0() * ctx.k0();
                for a in 0..2 {
                    out.k[ei][fnodes[a]] += v[4 + a] * sign;
                    out.k_prime[en[a]][fi] += v[6 + a] * sign;
                    for b in 0..2 {
                        out.n[en[b]][fnodes[a]] += (-inv * total * (de[b] * df[a]) + q * k2 * v[2 * a + b]) * sign;
                    }
                }
            }
        }
    }
    out
}

/// Max-norm of the entrywise difference relative to the max-norm of `reference`.
pub fn relative_max_diff(lib: impl Fn(usize, usize) -> Complex64, reference: &[Vec<Complex64>]) -> f64 {
    let mut diff: f64 = 0.0;
    let mut size: f64 = 0.0;
    for (i, row) in reference.iter().enumerate() {
        for (j, r) in row.iter().enumerate() {
            diff = diff.max((lib(i, j) - r).norm());
            size = size.max(r.norm());
        }
    }
    diff / size
}

pub fn circle_mesh(m: usize) -> Mesh {
    Mesh::initial(Curve::ellipse(1.0, 1.0).unwrap(), m).unwrap()
}

pub fn ex1_media() -> MediumPair {
    MediumPair::new(ex1_material(), MaterialPair::vacuum(), 1.0).unwrap()
}

/// Relative `L²(Γ)` errors of both traces against exact functions of the
/// boundary point and outward normal, by 6-point Gauss per element.
pub fn trace_errors(
    sol: &SolutionPair,
    exact1: impl Fn([f64; 2]) -> Complex64,
    exact2: impl Fn([f64; 2], [f64; 2]) -> Complex64,
) -> (f64, f64) {
    let (nodes, weights) = gauss_legendre(6);
    let (mut d1, mut n1, mut d2, mut n2) = (0.0, 0.0, 0.0, 0.0);
    for (m, e) in sol.mesh.elements().iter().enumerate() {
        for (&u, &w) in nodes.iter().zip(&weights) {
            let x = e.map(u);
            let wt = 0.5 * w * e.length;
            let (a, b) = (exact1(x), exact2(x, e.normal));
            d1 += wt * (sol.phi1(m, u) - a).norm_sqr();
            n1 += wt * a.norm_sqr();
            d2 += wt * (sol.c2[m] - b).norm_sqr();
            n2 += wt * b.norm_sqr();
        }
    }
    ((d1 / n1).sqrt(), (d2 / n2).sqrt())
}
