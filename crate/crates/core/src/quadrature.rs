//! Gauss and Lobatto rules, recursive adaptive Lobatto quadrature on
//! intervals and squares, cone-proximity dispatch and the closed-form pieces
//! of the singular same-element integrals.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{segment_segment_distance, Element};
use crate::kernels::KernelContext;
use crate::medium::MaterialPair;
use crate::Vec2;

/// Nodes in `[−1, 1]` with positive weights summing to 2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// `∫_{-1}^{1} f`.
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

pub const MAX_GAUSS: usize = 32;
pub const MIN_LOBATTO: usize = 3;
pub const MAX_LOBATTO: usize = 13;
/// Points per axis of the base Lobatto rule in the adaptive schemes.
pub const BASE_LOBATTO: usize = 7;

/// `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        0.5 * nf * (nf + 1.0) * x.powi(n as i32 + 1)
    } else {
        nf * (p0 - x * p1) / (1.0 - x * x)
    };
    (p1, dp)
}

fn compute_gauss(n: usize) -> QuadratureRule {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    QuadratureRule { nodes, weights }
}

fn compute_lobatto(n: usize) -> QuadratureRule {
    let m = n - 1; // interior nodes are the roots of P_m'
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[m] = 1.0;
    let mf = m as f64;
    for i in 1..=(m / 2) {
        let mut x = (std::f64::consts::PI * i as f64 / mf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(m, x);
            let ddp = (2.0 * x * dp - mf * (mf + 1.0) * p) / (1.0 - x * x);
            let dx = dp / ddp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[m - i] = x;
    }
    if n % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    for i in 0..n {
        let (p, _) = legendre(m, nodes[i]);
        weights[i] = 2.0 / (mf * (mf + 1.0) * p * p);
    }
    QuadratureRule { nodes, weights }
}

fn gauss_table() -> &'static [QuadratureRule] {
    static TABLE: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    TABLE.get_or_init(|| (1..=MAX_GAUSS).map(compute_gauss).collect())
}

fn lobatto_table() -> &'static [QuadratureRule] {
    static TABLE: OnceLock<Vec<QuadratureRule>> = OnceLock::new();
    TABLE.get_or_init(|| (MIN_LOBATTO..=MAX_LOBATTO).map(compute_lobatto).collect())
}

/// Gauss–Legendre rule with `n` points, exact to degree `2n − 1`.
pub fn gauss_rule(n: usize) -> Result<QuadratureRule> {
    if !(1..=MAX_GAUSS).contains(&n) {
        return Err(Error::Quadrature(format!(
            "Gauss rule with {n} points not supported (1..={MAX_GAUSS})"
        )));
    }
    Ok(gauss(n).clone())
}

/// Gauss–Lobatto rule with `n` points including `±1`, exact to degree `2n − 3`.
pub fn lobatto_rule(n: usize) -> Result<QuadratureRule> {
    if !(MIN_LOBATTO..=MAX_LOBATTO).contains(&n) {
        return Err(Error::Quadrature(format!(
            "Lobatto rule with {n} points not supported ({MIN_LOBATTO}..={MAX_LOBATTO})"
        )));
    }
    Ok(lobatto_table()[n - MIN_LOBATTO].clone())
}

#[inline]
pub(crate) fn gauss(n: usize) -> &'static QuadratureRule {
    &gauss_table()[n - 1]
}

#[inline]
pub(crate) fn lobatto(n: usize) -> &'static QuadratureRule {
    &lobatto_table()[n - MIN_LOBATTO]
}

/// Stopping parameters of the adaptive schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveBudget {
    pub rel_tol: f64,
    /// Absolute floor factor: cells are also accepted when their change is
    /// below `abs_tol · (|root estimate| + 1)`.
    pub abs_tol: f64,
    pub max_depth: usize,
}

impl Default for AdaptiveBudget {
    fn default() -> Self {
        Self {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            max_depth: 12,
        }
    }
}

impl AdaptiveBudget {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0 && self.max_depth >= 1) {
            return Err(Error::Validation(format!(
                "quadrature budget needs positive tolerances and max_depth >= 1, got {self:?}"
            )));
        }
        Ok(())
    }

    pub fn with_extra_depth(mut self, extra: usize) -> Self {
        self.max_depth += extra;
        self
    }
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Adaptive<T> {
    pub value: T,
    /// Accepted cells (leaves of the refinement tree).
    pub cells_used: usize,
    /// Integrand evaluations.
    pub evaluations: usize,
    pub converged: bool,
}

#[inline]
fn norm_inf<const N: usize>(v: &[Complex64; N]) -> f64 {
    v.iter().map(|z| z.re.abs().max(z.im.abs())).fold(0.0, f64::max)
}

#[inline]
fn add_scaled<const N: usize>(acc: &mut [Complex64; N], v: &[Complex64; N], w: f64) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b * w;
    }
}

#[inline]
fn diff_inf<const N: usize>(a: &[Complex64; N], b: &[Complex64; N]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d.re.abs().max(d.im.abs())
        })
        .fold(0.0, f64::max)
}

struct Adapt2<'a, F, const N: usize> {
    f: &'a mut F,
    rule: &'static QuadratureRule,
    rel_tol: f64,
    floor: f64,
    share_scale: f64,
    max_depth: usize,
    cells: usize,
    evals: usize,
    converged: bool,
}

impl<F: FnMut(f64, f64) -> [Complex64; N], const N: usize> Adapt2<'_, F, N> {
    fn cell(&mut self, x0: f64, x1: f64, y0: f64, y1: f64) -> [Complex64; N] {
        let (hx, hy) = (0.5 * (x1 - x0), 0.5 * (y1 - y0));
        let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let mut acc = [Complex64::new(0.0, 0.0); N];
        for (&u, &wu) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let x = cx + hx * u;
            for (&v, &wv) in self.rule.nodes.iter().zip(&self.rule.weights) {
                let y = cy + hy * v;
                let val = (self.f)(x, y);
                add_scaled(&mut acc, &val, wu * wv * hx * hy);
            }
        }
        self.evals += self.rule.len() * self.rule.len();
        acc
    }

    fn children(&mut self, x0: f64, x1: f64, y0: f64, y1: f64) -> [([Complex64; N], [f64; 4]); 4] {
        let (xm, ym) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
        let boxes = [[x0, xm, y0, ym], [xm, x1, y0, ym], [x0, xm, ym, y1], [xm, x1, ym, y1]];
        boxes.map(|b| (self.cell(b[0], b[1], b[2], b[3]), b))
    }

    fn refine(&mut self, b: [f64; 4], parent: [Complex64; N], depth: usize) -> [Complex64; N] {
        let kids = self.children(b[0], b[1], b[2], b[3]);
        let mut sum = [Complex64::new(0.0, 0.0); N];
        for (v, _) in &kids {
            add_scaled(&mut sum, v, 1.0);
        }
        let area = (b[1] - b[0]) * (b[3] - b[2]);
        let tol = (self.rel_tol * norm_inf(&sum))
            .max(self.share_scale * area)
            .max(self.floor);
        if diff_inf(&sum, &parent) <= tol {
            self.cells += 1;
            return sum;
        }
        if depth + 1 >= self.max_depth {
            self.converged = false;
            self.cells += 1;
            return sum;
        }
        let mut total = [Complex64::new(0.0, 0.0); N];
        for (v, cb) in kids {
            let r = self.refine(cb, v, depth + 1);
            add_scaled(&mut total, &r, 1.0);
        }
        total
    }
}

/// Recursive quadtree Lobatto integration of `f` over `[−1, 1]²`.
///
/// A cell is accepted when the sum of its four children's 7×7 Lobatto
/// estimates differs from its own estimate by at most
/// `max(rel_tol·|children|, rel_tol·|root|·(cell area / 4), abs_tol·(|root| + 1))`
/// in the max norm over components.
pub fn adaptive_lobatto_2d<const N: usize>(
    mut f: impl FnMut(f64, f64) -> [Complex64; N],
    budget: &AdaptiveBudget,
) -> Adaptive<[Complex64; N]> {
    let rule = lobatto(BASE_LOBATTO);
    let mut st = Adapt2 {
        f: &mut f,
        rule,
        rel_tol: budget.rel_tol,
        floor: 0.0,
        share_scale: 0.0,
        max_depth: budget.max_depth,
        cells: 0,
        evals: 0,
        converged: true,
    };
    let root = st.cell(-1.0, 1.0, -1.0, 1.0);
    let scale = norm_inf(&root);
    st.floor = budget.abs_tol * (scale + 1.0);
    st.share_scale = budget.rel_tol * scale / 4.0;
    let value = st.refine([-1.0, 1.0, -1.0, 1.0], root, 0);
    Adaptive {
        value,
        cells_used: st.cells,
        evaluations: st.evals,
        converged: st.converged,
    }
}

/// Scalar form of [`adaptive_lobatto_2d`].
pub fn adaptive_lobatto_2d_scalar(
    mut f: impl FnMut(f64, f64) -> Complex64,
    budget: &AdaptiveBudget,
) -> Adaptive<Complex64> {
    let r = adaptive_lobatto_2d(|x, y| [f(x, y)], budget);
    Adaptive {
        value: r.value[0],
        cells_used: r.cells_used,
        evaluations: r.evaluations,
        converged: r.converged,
    }
}

struct Adapt1<'a, F, const N: usize> {
    f: &'a mut F,
    rule: &'static QuadratureRule,
    rel_tol: f64,
    floor: f64,
    share_scale: f64,
    max_depth: usize,
    cells: usize,
    evals: usize,
    converged: bool,
}

impl<F: FnMut(f64) -> [Complex64; N], const N: usize> Adapt1<'_, F, N> {
    fn cell(&mut self, a: f64, b: f64) -> [Complex64; N] {
        let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
        let mut acc = [Complex64::new(0.0, 0.0); N];
        for (&u, &w) in self.rule.nodes.iter().zip(&self.rule.weights) {
            let v = (self.f)(c + h * u);
            add_scaled(&mut acc, &v, w * h);
        }
        self.evals += self.rule.len();
        acc
    }

    fn refine(&mut self, a: f64, b: f64, parent: [Complex64; N], depth: usize) -> [Complex64; N] {
        let m = 0.5 * (a + b);
        let l = self.cell(a, m);
        let r = self.cell(m, b);
        let mut sum = l;
        add_scaled(&mut sum, &r, 1.0);
        let tol = (self.rel_tol * norm_inf(&sum))
            .max(self.share_scale * (b - a))
            .max(self.floor);
        if diff_inf(&sum, &parent) <= tol {
            self.cells += 1;
            return sum;
        }
        if depth + 1 >= self.max_depth {
            self.converged = false;
            self.cells += 1;
            return sum;
        }
        let mut total = self.refine(a, m, l, depth + 1);
        add_scaled(&mut total, &self.refine(m, b, r, depth + 1), 1.0);
        total
    }
}

/// Recursive bisection Lobatto integration of `f` over `[a, b]`, with the
/// acceptance rule of [`adaptive_lobatto_2d`].
pub fn adaptive_lobatto_1d<const N: usize>(
    mut f: impl FnMut(f64) -> [Complex64; N],
    a: f64,
    b: f64,
    budget: &AdaptiveBudget,
) -> Adaptive<[Complex64; N]> {
    let rule = lobatto(BASE_LOBATTO);
    let mut st = Adapt1 {
        f: &mut f,
        rule,
        rel_tol: budget.rel_tol,
        floor: 0.0,
        share_scale: 0.0,
        max_depth: budget.max_depth,
        cells: 0,
        evals: 0,
        converged: true,
    };
    let root = st.cell(a, b);
    let scale = norm_inf(&root);
    st.floor = budget.abs_tol * (scale + 1.0);
    st.share_scale = budget.rel_tol * scale / (b - a).abs().max(f64::MIN_POSITIVE) / 2.0;
    let value = st.refine(a, b, root, 0);
    Adaptive {
        value,
        cells_used: st.cells,
        evaluations: st.evals,
        converged: st.converged,
    }
}

/// Fixed tensor Gauss rule over `[−1, 1]²`.
pub fn tensor_gauss_2d<const N: usize>(mut f: impl FnMut(f64, f64) -> [Complex64; N], n: usize) -> [Complex64; N] {
    let rule = gauss(n);
    let mut acc = [Complex64::new(0.0, 0.0); N];
    for (&u, &wu) in rule.nodes.iter().zip(&rule.weights) {
        for (&v, &wv) in rule.nodes.iter().zip(&rule.weights) {
            add_scaled(&mut acc, &f(u, v), wu * wv);
        }
    }
    acc
}

/// Composite tensor Gauss rule: `cells × cells` equal squares with an
/// `n × n` rule on each.
pub fn composite_gauss_2d<const N: usize>(
    mut f: impl FnMut(f64, f64) -> [Complex64; N],
    cells: usize,
    n: usize,
) -> [Complex64; N] {
    let rule = gauss(n);
    let h = 2.0 / cells as f64;
    let mut acc = [Complex64::new(0.0, 0.0); N];
    for i in 0..cells {
        let cx = -1.0 + h * (i as f64 + 0.5);
        for j in 0..cells {
            let cy = -1.0 + h * (j as f64 + 0.5);
            let mut cell = [Complex64::new(0.0, 0.0); N];
            for (&u, &wu) in rule.nodes.iter().zip(&rule.weights) {
                for (&v, &wv) in rule.nodes.iter().zip(&rule.weights) {
                    add_scaled(&mut cell, &f(cx + 0.5 * h * u, cy + 0.5 * h * v), wu * wv);
                }
            }
            add_scaled(&mut acc, &cell, 0.25 * h * h);
        }
    }
    acc
}

/// How an element pair is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairClass {
    /// Same element: closed-form logarithmic part plus Gauss remainder.
    Coincident,
    /// Elements sharing one node; `test_end`/`trial_end` say whether the
    /// shared node is the end (`u = +1`) of the respective element.
    Adjacent { test_end: bool, trial_end: bool },
    /// Close or cone-straddling pair: adaptive Lobatto.
    Adaptive,
    /// Well-separated pair away from all cones: tensor Gauss of this order.
    Smooth(usize),
}

/// Corners of the difference set `{x − y : x ∈ e, y ∈ f}`.
fn difference_corners(e: &Element, f: &Element) -> [[f64; 2]; 4] {
    let d = |a: [f64; 2], b: [f64; 2]| [a[0] - b[0], a[1] - b[1]];
    [
        d(e.start, f.start),
        d(e.end, f.start),
        d(e.end, f.end),
        d(e.start, f.end),
    ]
}

/// Distance from the difference set of the two elements to the nearest cone
/// boundary among the given media (`∞` when none is hyperbolic).
pub fn cone_distance(e: &Element, f: &Element, media: &[MaterialPair]) -> f64 {
    let corners = difference_corners(e, f);
    media
        .iter()
        .map(|m| m.cone().polygon_distance(&corners))
        .fold(f64::INFINITY, f64::min)
}

/// Whether the elements share a node, returning which endpoints coincide.
pub fn shared_node(e: &Element, f: &Element) -> Option<(bool, bool)> {
    if e.end == f.start {
        Some((true, false))
    } else if e.start == f.end {
        Some((false, true))
    } else {
        None
    }
}

/// True when the difference set of the two elements meets the τ-neighbourhood
/// of either medium's cone boundary, or when the elements coincide or touch.
pub fn needs_adaptive(e: &Element, f: &Element, media: &[MaterialPair], tau: f64) -> bool {
    if e == f || shared_node(e, f).is_some() {
        return true;
    }
    cone_distance(e, f, media) < tau
}

/// Dispatch for one element pair.
pub fn classify_pair(e: &Element, f: &Element, media: &[MaterialPair], tau: f64, k_max: f64) -> PairClass {
    if e == f {
        return PairClass::Coincident;
    }
    if let Some((test_end, trial_end)) = shared_node(e, f) {
        return PairClass::Adjacent { test_end, trial_end };
    }
    let h = e.length.max(f.length);
    let sep = segment_segment_distance(e.start, e.end, f.start, f.end);
    let cone = cone_distance(e, f, media);
    if cone < tau || sep < h {
        return PairClass::Adaptive;
    }
    PairClass::Smooth(smooth_order(sep.min(cone) / h, k_max * h))
}

/// Gauss order for a pair whose kernel singularities stay at relative
/// distance `r` (in units of the larger element length) from the square,
/// with `kh` the largest phase change across an element.
pub fn smooth_order(r: f64, kh: f64) -> usize {
    let x = 1.0 + 2.0 * r;
    let rho = x + (x * x - 1.0).sqrt();
    let n = ((-(1e-11f64).ln()) / (2.0 * rho.ln())).ceil() as usize;
    let n = n + (kh / 2.0).ceil() as usize;
    n.clamp(3, 12)
}

/// `∫_{-1}^{1} f(u, y(u)) du` over one element for an observation point `x`
/// off the element: tensor-free Gauss of distance-dependent order when `x` is
/// far from the element and from the medium's cone, adaptive Lobatto
/// otherwise.
pub fn element_integral<const N: usize>(
    e: &Element,
    x: Vec2,
    mat: &MaterialPair,
    tau: f64,
    k_max: f64,
    budget: &AdaptiveBudget,
    mut f: impl FnMut(f64, Vec2) -> [Complex64; N],
) -> Adaptive<[Complex64; N]> {
    let d = e.distance(x);
    let corners = [
        [x[0] - e.start[0], x[1] - e.start[1]],
        [x[0] - e.end[0], x[1] - e.end[1]],
    ];
    let cone = mat.cone().polygon_distance(&corners);
    if cone < tau || d < 2.0 * e.length {
        return adaptive_lobatto_1d(|u| f(u, e.map(u)), -1.0, 1.0, budget);
    }
    let n = smooth_order(d.min(cone) / e.length, k_max * e.length);
    let rule = gauss(n);
    let mut acc = [Complex64::new(0.0, 0.0); N];
    for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
        add_scaled(&mut acc, &f(u, e.map(u)), w);
    }
    Adaptive {
        value: acc,
        cells_used: 1,
        evaluations: n,
        converged: true,
    }
}

/// `∫_0^2 u^k ln u du`.
pub fn log_moment(k: usize) -> f64 {
    let kp = (k + 1) as f64;
    2f64.powf(kp) / kp * (std::f64::consts::LN_2 - 1.0 / kp)
}

/// Reference-element basis used by the closed-form same-element integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Constant,
    /// Hat restricted to the element, `1` at the start node.
    LinearStart,
    /// Hat restricted to the element, `1` at the end node.
    LinearEnd,
}

impl Basis {
    #[inline]
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Basis::Constant => 1.0,
            Basis::LinearStart => 0.5 * (1.0 - u),
            Basis::LinearEnd => 0.5 * (1.0 + u),
        }
    }
}

/// Which kernel a singular integral uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelKind {
    Single,
    Double,
}

/// Coefficients `q₀..q₃` of `Q(u) = ∫∫_{|t−s|=u} p(s) q(t)` for `u ∈ [0, 2]`,
/// where the trial basis depends on `s` and the test basis on `t`.
pub fn coincident_weight(trial: Basis, test: Basis) -> [f64; 4] {
    let g = gauss(2);
    let q = |u: f64| -> f64 {
        // t runs over [−1, 1−u]; the two orderings s = t+u and t = s+u
        let (a, b) = (-1.0, 1.0 - u);
        let (h, c) = (0.5 * (b - a), 0.5 * (a + b));
        g.nodes
            .iter()
            .zip(&g.weights)
            .map(|(&x, &w)| {
                let t = c + h * x;
                w * h * (trial.eval(t + u) * test.eval(t) + trial.eval(t) * test.eval(t + u))
            })
            .sum()
    };
    let us = [0.0, 2.0 / 3.0, 4.0 / 3.0, 2.0];
    let vals = us.map(q);
    // Newton divided differences, then expand to monomials
    let mut dd = vals;
    for j in 1..4 {
        for i in (j..4).rev() {
            dd[i] = (dd[i] - dd[i - 1]) / (us[i] - us[i - j]);
        }
    }
    let mut coef = [0.0; 4];
    for i in (0..4).rev() {
        // coef ← coef·(u − us[i]) + dd[i]
        let mut next = [0.0; 4];
        for k in 0..4 {
            if k + 1 < 4 {
                next[k + 1] += coef[k];
            }
            next[k] -= us[i] * coef[k];
        }
        next[0] += dd[i];
        coef = next;
    }
    coef
}

/// Number of Gauss points in `v` (with `u = 2v²`) for the smooth remainder of
/// same-element single-layer integrals.
const COINCIDENT_REMAINDER_POINTS: usize = 24;

/// Same-element integrals `∫_E ∫_E Φ(x,y) b_trial(y) b_test(x) ds_y ds_x` for
/// every pair of linear bases, indexed `[trial][test]` with 0 = start, 1 = end.
///
/// On a flat element `r̃ = ρ·|x − y|` with `ρ = √(ε₁τ₁² + ε₂τ₂²)`, so the
/// integrand depends on `u = |t − s|` only. The logarithm of the static
/// kernel is integrated in closed form and the smooth remainder by Gauss.
pub fn coincident_single_layer(elem: &Element, ctx: &KernelContext) -> [[Complex64; 2]; 2] {
    let bases = [Basis::LinearStart, Basis::LinearEnd];
    let mut weights = [[[0.0; 4]; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            weights[a][b] = coincident_weight(bases[a], bases[b]);
        }
    }
    let half = 0.5 * elem.length;
    let rho = ctx.material().deformed_distance_unchecked(elem.tangent);
    let c0 = -ctx.sqrt_eps() / (2.0 * std::f64::consts::PI);
    let log_scale = (rho * half).ln();
    let mut out = [[Complex64::new(0.0, 0.0); 2]; 2];
    // ∫_0^2 Φ₀(u) Q(u) du with Φ₀ = c0·(ln u + ln(ρL/2))
    for a in 0..2 {
        for b in 0..2 {
            let q = &weights[a][b];
            let mut s = Complex64::new(0.0, 0.0);
            for k in 0..4 {
                let poly = 2f64.powi(k as i32 + 1) / (k + 1) as f64;
                s += q[k] * (c0 * log_moment(k) + c0 * log_scale * poly);
            }
            out[a][b] = s;
        }
    }
    if !ctx.is_static() {
        let g = gauss(COINCIDENT_REMAINDER_POINTS);
        for (&x, &w) in g.nodes.iter().zip(&g.weights) {
            let v = 0.5 * (x + 1.0);
            let u = 2.0 * v * v;
            let jac = 0.5 * 4.0 * v * w;
            let r = rho * (half * u);
            let rem = ctx.phi_of_r(r) - c0 * r.ln();
            for a in 0..2 {
                for b in 0..2 {
                    let q = &weights[a][b];
                    let qu = q[0] + u * (q[1] + u * (q[2] + u * q[3]));
                    out[a][b] += rem * (qu * jac);
                }
            }
        }
    }
    let jac = half * half;
    for row in out.iter_mut() {
        for z in row.iter_mut() {
            *z *= jac;
        }
    }
    out
}

/// Same-element Galerkin integral of a single medium's kernel with the given
/// trial and test bases.
///
/// The double-layer kernel carries the factor `(x − y)·ν(y)`, which vanishes
/// identically on a flat element, so its same-element integral is zero.
pub fn singular_pair_integral(
    elem: &Element,
    test: Basis,
    trial: Basis,
    ctx: &KernelContext,
    kind: KernelKind,
) -> Complex64 {
    match kind {
        KernelKind::Double => Complex64::new(0.0, 0.0),
        KernelKind::Single => {
            let ab = coincident_single_layer(elem, ctx);
            let split = |b: Basis| -> [f64; 2] {
                match b {
                    Basis::Constant => [1.0, 1.0],
                    Basis::LinearStart => [1.0, 0.0],
                    Basis::LinearEnd => [0.0, 1.0],
                }
            };
            let (wt, ws) = (split(test), split(trial));
            let mut s = Complex64::new(0.0, 0.0);
            for a in 0..2 {
                for b in 0..2 {
                    s += ab[a][b] * (ws[a] * wt[b]);
                }
            }
            s
        }
    }
}
