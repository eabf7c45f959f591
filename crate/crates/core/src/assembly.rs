//! Galerkin blocks of the transmission system.
//!
//! Unknowns are the nodal values `c⁽¹⁾` of the continuous piecewise-linear
//! trace and the element values `c⁽²⁾` of the piecewise-constant conormal
//! trace. On a closed curve node `m` is the start of element `m`, so both
//! unknown vectors have one entry per element.
//!
//! Every element pair `(e, f)` with `e ≤ f` is integrated once for both media
//! and all bases; the single-layer, double-layer and hypersingular entries of
//! both orderings are then scattered from that one result.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Element, Mesh};
use crate::kernels::{source_traces, KernelContext, MediumPair, PointSource};
use crate::linalg::{lu_factor, relative_residual, DenseMatrix};
use crate::medium::MaterialPair;
use crate::quadrature::{
    adaptive_lobatto_2d, classify_pair, coincident_single_layer, element_integral, tensor_gauss_2d, AdaptiveBudget,
    PairClass,
};

/// Discrete traces on a mesh: `φ⁽¹⁾ = Σ c1[n]·hat_n`, `φ⁽²⁾ = Σ c2[m]·χ_m`.
#[derive(Debug, Clone)]
pub struct SolutionPair {
    pub mesh: Mesh,
    pub c1: Vec<Complex64>,
    pub c2: Vec<Complex64>,
}

impl SolutionPair {
    pub fn new(mesh: Mesh, c1: Vec<Complex64>, c2: Vec<Complex64>) -> Result<Self> {
        if c1.len() != mesh.len() || c2.len() != mesh.len() {
            return Err(Error::Dimension(format!(
                "{} nodal and {} element coefficients for a mesh of {} elements",
                c1.len(),
                c2.len(),
                mesh.len()
            )));
        }
        Ok(Self { mesh, c1, c2 })
    }

    /// `φ⁽¹⁾` at parameter `u ∈ [−1, 1]` of element `m`.
    pub fn phi1(&self, m: usize, u: f64) -> Complex64 {
        let (a, b) = self.mesh.element_nodes(m);
        self.c1[a] * (0.5 * (1.0 - u)) + self.c1[b] * (0.5 * (1.0 + u))
    }
}

/// Quadrature and execution settings of the assembly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// Width of the cone neighbourhood that sends pairs to adaptive quadrature.
    pub tau: f64,
    pub budget: AdaptiveBudget,
    /// Fail on the first pair whose adaptive quadrature hit `max_depth`.
    pub strict: bool,
    pub parallel: bool,
    /// Keep one [`PairRecord`] per element pair.
    pub instrument: bool,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            tau: 0.1,
            budget: AdaptiveBudget::default(),
            strict: false,
            parallel: true,
            instrument: false,
        }
    }
}

/// Extra subdivision depth granted to node-sharing pairs.
const ADJACENT_EXTRA_DEPTH: usize = 4;

/// Rows integrated per parallel task.
const ROW_CHUNK: usize = 64;

/// Quadrature cost of one element pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairRecord {
    pub m: usize,
    pub n: usize,
    pub cells_used: usize,
    pub converged: bool,
}

/// Counters collected during assembly.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssemblyStats {
    pub coincident: usize,
    pub adjacent: usize,
    pub adaptive: usize,
    pub smooth: usize,
    pub cells: usize,
    pub evaluations: usize,
    /// Pairs `(m, n)`, `m ≤ n`, whose adaptive quadrature did not converge.
    pub non_converged: Vec<(usize, usize)>,
    pub records: Vec<PairRecord>,
}

impl AssemblyStats {
    pub fn pairs(&self) -> usize {
        self.coincident + self.adjacent + self.adaptive + self.smooth
    }

    /// Pairs integrated by the adaptive scheme, including node-sharing ones.
    pub fn adaptive_pairs(&self) -> usize {
        self.adjacent + self.adaptive
    }

    pub fn write_records_csv(&self, path: &Path) -> Result<()> {
        let mut s = String::from("m,n,cells_used,converged\n");
        for r in &self.records {
            let _ = writeln!(s, "{},{},{},{}", r.m, r.n, r.cells_used, u8::from(r.converged));
        }
        std::fs::write(path, s)?;
        Ok(())
    }
}

/// Medium-difference operator blocks `S = S₁ − S₂`, `K = K₁ − K₂`,
/// `N = N₁ − N₂` (or a single medium's blocks).
#[derive(Debug, Clone)]
pub struct OperatorBlocks {
    /// `S(m, n) = ⟨S χ_n, χ_m⟩`.
    pub s: DenseMatrix,
    /// `K(m, n) = ⟨K hat_n, χ_m⟩`.
    pub k: DenseMatrix,
    /// `N(m, n) = ⟨N hat_n, hat_m⟩`.
    pub n: DenseMatrix,
    pub stats: AssemblyStats,
}

/// One medium's contribution with its sign in the difference.
#[derive(Clone, Copy)]
struct Term<'a> {
    ctx: &'a KernelContext,
    sign: f64,
}

/// Integrated values of one pair, `e` the test and `f` the trial element.
#[derive(Clone, Copy, Default)]
struct PairValues {
    s: Complex64,
    /// `n[b][a]`: test node `b` of `e`, trial node `a` of `f`.
    n: [[Complex64; 2]; 2],
    /// `⟨K hat_{a(f)}, χ_e⟩`.
    k_ef: [Complex64; 2],
    /// `⟨K hat_{b(e)}, χ_f⟩`.
    k_fe: [Complex64; 2],
}

struct PairResult {
    e: usize,
    f: usize,
    class: PairClass,
    values: PairValues,
    cells: usize,
    evaluations: usize,
    converged: bool,
}

/// Components per medium in the pair integrand: four `Φ λ_a λ_b`, two
/// `∂Φ/∂ν̃(y) λ_a`, two `∂Φ/∂ν̃(x) λ_b`.
const PER_MEDIUM: usize = 8;
const WIDTH: usize = 2 * PER_MEDIUM;

#[inline]
fn hats(u: f64) -> [f64; 2] {
    [0.5 * (1.0 - u), 0.5 * (1.0 + u)]
}

#[inline]
fn pair_integrand(terms: &[Term], e: &Element, f: &Element, t: f64, s: f64) -> [Complex64; WIDTH] {
    let x = e.map(t);
    let y = f.map(s);
    let dx = [x[0] - y[0], x[1] - y[1]];
    let (la, lb) = (hats(s), hats(t));
    let ny = dx[0] * f.normal[0] + dx[1] * f.normal[1];
    let nx = dx[0] * e.normal[0] + dx[1] * e.normal[1];
    let mut out = [Complex64::new(0.0, 0.0); WIDTH];
    for (j, term) in terms.iter().enumerate() {
        let (phi, g) = term.ctx.eval(dx);
        let o = &mut out[j * PER_MEDIUM..(j + 1) * PER_MEDIUM];
        for a in 0..2 {
            for b in 0..2 {
                o[2 * a + b] = phi * (la[a] * lb[b]);
            }
            o[4 + a] = g * (ny * la[a]);
            o[6 + a] = -g * (nx * lb[a]);
        }
    }
    out
}

/// Duffy-type map for pairs sharing one node: the shared node sits at
/// `σ = 0`, and `α = σ²` grades the cells towards it.
#[inline]
fn adjacent_integrand(
    terms: &[Term],
    e: &Element,
    f: &Element,
    test_end: bool,
    trial_end: bool,
    p: f64,
    q: f64,
) -> [Complex64; WIDTH] {
    let sigma = 0.5 * (p + 1.0);
    let eta = 0.5 * (q + 1.0);
    if sigma == 0.0 {
        return [Complex64::new(0.0, 0.0); WIDTH];
    }
    let to_t = |alpha: f64| {
        if test_end {
            1.0 - 2.0 * alpha
        } else {
            -1.0 + 2.0 * alpha
        }
    };
    let to_s = |beta: f64| if trial_end { 1.0 - 2.0 * beta } else { -1.0 + 2.0 * beta };
    let r2 = sigma * sigma;
    let w = 2.0 * sigma * r2;
    let mut out = pair_integrand(terms, e, f, to_t(r2), to_s(r2 * eta));
    let other = pair_integrand(terms, e, f, to_t(r2 * eta), to_s(r2));
    for (o, v) in out.iter_mut().zip(&other) {
        *o = (*o + v) * w;
    }
    out
}

fn combine(terms: &[Term], e: &Element, f: &Element, raw: &[Complex64; WIDTH]) -> PairValues {
    let mut v = PairValues::default();
    let de = [-1.0 / e.length, 1.0 / e.length];
    let df = [-1.0 / f.length, 1.0 / f.length];
    for (j, term) in terms.iter().enumerate() {
        let o = &raw[j * PER_MEDIUM..(j + 1) * PER_MEDIUM];
        let mat = term.ctx.material();
        let total: Complex64 = o[..4].iter().sum();
        let q = f.normal[0] * e.normal[0] / mat.eps1 + f.normal[1] * e.normal[1] / mat.eps2;
        let k2 = term.ctx.k0() * term.ctx.k0();
        let inv = 1.0 / (mat.eps1 * mat.eps2);
        v.s += total * term.sign;
        for a in 0..2 {
            v.k_ef[a] += o[4 + a] * term.sign;
            v.k_fe[a] += o[6 + a] * term.sign;
            for b in 0..2 {
                v.n[b][a] += (-inv * total * (de[b] * df[a]) + q * k2 * o[2 * a + b]) * term.sign;
            }
        }
    }
    v
}

fn integrate_pair(
    terms: &[Term],
    materials: &[MaterialPair],
    k_max: f64,
    mesh: &Mesh,
    e_idx: usize,
    f_idx: usize,
    opts: &AssemblyOptions,
) -> PairResult {
    let e = mesh.element(e_idx);
    let f = mesh.element(f_idx);
    let nodes = mesh.len();
    // Neighbours are decided by mesh topology so the closing pair is never
    // left to coordinate comparison.
    let class = if e_idx == f_idx {
        PairClass::Coincident
    } else if (e_idx + 1) % nodes == f_idx {
        PairClass::Adjacent {
            test_end: true,
            trial_end: false,
        }
    } else if (f_idx + 1) % nodes == e_idx {
        PairClass::Adjacent {
            test_end: false,
            trial_end: true,
        }
    } else {
        classify_pair(e, f, materials, opts.tau, k_max)
    };
    let jac = 0.25 * e.length * f.length;
    let scale = |mut raw: [Complex64; WIDTH]| {
        for z in raw.iter_mut() {
            *z *= jac;
        }
        raw
    };
    let (raw, cells, evaluations, converged) = match class {
        PairClass::Coincident => {
            let mut raw = [Complex64::new(0.0, 0.0); WIDTH];
            for (j, term) in terms.iter().enumerate() {
                let i = coincident_single_layer(e, term.ctx);
                for a in 0..2 {
                    for b in 0..2 {
                        raw[j * PER_MEDIUM + 2 * a + b] = i[a][b];
                    }
                }
            }
            (raw, 1, 0, true)
        }
        PairClass::Adjacent { test_end, trial_end } => {
            let budget = opts.budget.with_extra_depth(ADJACENT_EXTRA_DEPTH);
            let r = adaptive_lobatto_2d(
                |p, q| adjacent_integrand(terms, e, f, test_end, trial_end, p, q),
                &budget,
            );
            (scale(r.value), r.cells_used, r.evaluations, r.converged)
        }
        PairClass::Adaptive => {
            let r = adaptive_lobatto_2d(|t, s| pair_integrand(terms, e, f, t, s), &opts.budget);
            (scale(r.value), r.cells_used, r.evaluations, r.converged)
        }
        PairClass::Smooth(n) => {
            let raw = tensor_gauss_2d(|t, s| pair_integrand(terms, e, f, t, s), n);
            (scale(raw), 1, n * n, true)
        }
    };
    PairResult {
        e: e_idx,
        f: f_idx,
        class,
        values: combine(terms, e, f, &raw),
        cells,
        evaluations,
        converged,
    }
}

fn assemble_terms(mesh: &Mesh, terms: &[Term], opts: &AssemblyOptions) -> Result<OperatorBlocks> {
    opts.budget.validate()?;
    if !(opts.tau >= 0.0 && opts.tau.is_finite()) {
        return Err(Error::Validation(format!(
            "tau must be finite and non-negative, got {}",
            opts.tau
        )));
    }
    let m = mesh.len();
    let materials: Vec<MaterialPair> = terms.iter().map(|t| *t.ctx.material()).collect();
    let k_max = terms.iter().map(|t| t.ctx.max_wavenumber()).fold(0.0, f64::max);
    let row = |e: usize| -> Vec<PairResult> {
        (e..m)
            .map(|f| integrate_pair(terms, &materials, k_max, mesh, e, f, opts))
            .collect()
    };

    let mut s = DenseMatrix::zeros(m, m);
    let mut k = DenseMatrix::zeros(m, m);
    let mut n = DenseMatrix::zeros(m, m);
    let mut stats = AssemblyStats::default();
    let mut scatter = |rows: Vec<Vec<PairResult>>| {
        for r in rows.into_iter().flatten() {
            let (ea, eb) = mesh.element_nodes(r.e);
            let (fa, fb) = mesh.element_nodes(r.f);
            let (en, fn_) = ([ea, eb], [fa, fb]);
            let v = &r.values;
            s[(r.e, r.f)] += v.s;
            for a in 0..2 {
                k[(r.e, fn_[a])] += v.k_ef[a];
                for b in 0..2 {
                    n[(en[b], fn_[a])] += v.n[b][a];
                }
            }
            if r.e != r.f {
                s[(r.f, r.e)] += v.s;
                for b in 0..2 {
                    k[(r.f, en[b])] += v.k_fe[b];
                    for a in 0..2 {
                        n[(fn_[a], en[b])] += v.n[b][a];
                    }
                }
            }
            match r.class {
                PairClass::Coincident => stats.coincident += 1,
                PairClass::Adjacent { .. } => stats.adjacent += 1,
                PairClass::Adaptive => stats.adaptive += 1,
                PairClass::Smooth(_) => stats.smooth += 1,
            }
            stats.cells += r.cells;
            stats.evaluations += r.evaluations;
            if !r.converged {
                stats.non_converged.push((r.e, r.f));
            }
            if opts.instrument {
                stats.records.push(PairRecord {
                    m: r.e,
                    n: r.f,
                    cells_used: r.cells,
                    converged: r.converged,
                });
            }
        }
    };

    if opts.parallel {
        let batch = ROW_CHUNK * rayon::current_num_threads().max(1);
        let mut start = 0;
        while start < m {
            let end = (start + batch).min(m);
            let rows: Vec<Vec<PairResult>> = (start..end).into_par_iter().map(row).collect();
            scatter(rows);
            start = end;
        }
    } else {
        for e in 0..m {
            scatter(vec![row(e)]);
        }
    }

    if opts.strict {
        if let Some(&(m, n)) = stats.non_converged.first() {
            return Err(Error::NonConverged { m, n });
        }
    }
    Ok(OperatorBlocks { s, k, n, stats })
}

/// `S`, `K` and `N` for the interior-minus-exterior kernel difference.
pub fn assemble_operators(mesh: &Mesh, media: &MediumPair, opts: &AssemblyOptions) -> Result<OperatorBlocks> {
    let terms = [
        Term {
            ctx: &media.interior,
            sign: 1.0,
        },
        Term {
            ctx: &media.exterior,
            sign: -1.0,
        },
    ];
    assemble_terms(mesh, &terms, opts)
}

/// `S_j`, `K_j` and `N_j` of a single medium.
pub fn assemble_single_medium(mesh: &Mesh, ctx: &KernelContext, opts: &AssemblyOptions) -> Result<OperatorBlocks> {
    assemble_terms(mesh, &[Term { ctx, sign: 1.0 }], opts)
}

fn default_operators(mesh: &Mesh, mat1: MaterialPair, mat2: MaterialPair, k0: f64) -> Result<OperatorBlocks> {
    assemble_operators(mesh, &MediumPair::new(mat1, mat2, k0)?, &AssemblyOptions::default())
}

/// `S_h = ⟨(S₁ − S₂)χ_n, χ_m⟩`.
pub fn assemble_s(mesh: &Mesh, mat1: MaterialPair, mat2: MaterialPair, k0: f64) -> Result<DenseMatrix> {
    Ok(default_operators(mesh, mat1, mat2, k0)?.s)
}

/// `K_h = ⟨(K₁ − K₂)hat_n, χ_m⟩`.
pub fn assemble_k(mesh: &Mesh, mat1: MaterialPair, mat2: MaterialPair, k0: f64) -> Result<DenseMatrix> {
    Ok(default_operators(mesh, mat1, mat2, k0)?.k)
}

/// `N_h = ⟨(N₁ − N₂)hat_n, hat_m⟩` in the weak form
/// `−(1/ε₁ε₂)⟨S dφ_n/ds, dφ_m/ds⟩ + k₀²⟨S(φ_n ν̃)·ν, φ_m⟩`.
pub fn assemble_n(mesh: &Mesh, mat1: MaterialPair, mat2: MaterialPair, k0: f64) -> Result<DenseMatrix> {
    Ok(default_operators(mesh, mat1, mat2, k0)?.n)
}

/// Mixed mass matrix `I_h(m, n) = ⟨hat_n, χ_m⟩`.
pub fn assemble_i(mesh: &Mesh) -> DenseMatrix {
    let m = mesh.len();
    let mut i = DenseMatrix::zeros(m, m);
    for (e, el) in mesh.elements().iter().enumerate() {
        let (a, b) = mesh.element_nodes(e);
        i[(e, a)] += Complex64::new(0.5 * el.length, 0.0);
        i[(e, b)] += Complex64::new(0.5 * el.length, 0.0);
    }
    i
}

/// Load vectors `g⁽¹⁾(n) = ⟨g⁽¹⁾, hat_n⟩` and `g⁽²⁾(m) = ⟨g⁽²⁾, χ_m⟩`.
pub fn assemble_rhs(
    mesh: &Mesh,
    src: &PointSource,
    media: &MediumPair,
    tau: f64,
    budget: &AdaptiveBudget,
) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    src.validate(mesh)?;
    let m = mesh.len();
    let mut g1 = vec![Complex64::new(0.0, 0.0); m];
    let mut g2 = vec![Complex64::new(0.0, 0.0); m];
    if src.amplitude == Complex64::new(0.0, 0.0) {
        return Ok((g1, g2));
    }
    let ctx = media.get(src.domain);
    for (e, el) in mesh.elements().iter().enumerate() {
        let half = 0.5 * el.length;
        let r = element_integral(
            el,
            src.location,
            ctx.material(),
            tau,
            ctx.max_wavenumber(),
            budget,
            |u, y| {
                let (a, b) = source_traces(src, media, y, el.normal);
                let l = hats(u);
                [a * (l[0] * half), a * (l[1] * half), b * half]
            },
        );
        let (na, nb) = mesh.element_nodes(e);
        g1[na] += r.value[0];
        g1[nb] += r.value[1];
        g2[e] = r.value[2];
    }
    Ok((g1, g2))
}

/// Solver diagnostics of one block solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveInfo {
    pub residual: f64,
    pub growth_factor: f64,
}

/// Dense transmission system `[[N, I′ − K′], [I + K, −S]]·[c⁽¹⁾; c⁽²⁾] = [g⁽¹⁾; g⁽²⁾]`.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub mesh: Mesh,
    pub n: DenseMatrix,
    pub k: DenseMatrix,
    pub k_prime: DenseMatrix,
    pub s: DenseMatrix,
    pub i: DenseMatrix,
    pub i_prime: DenseMatrix,
    pub g1: Vec<Complex64>,
    pub g2: Vec<Complex64>,
    pub matrix: DenseMatrix,
    pub stats: AssemblyStats,
}

impl BlockSystem {
    /// Number of nodal unknowns `M₁`.
    pub fn m1(&self) -> usize {
        self.n.rows()
    }

    /// Number of element unknowns `M₂`.
    pub fn m2(&self) -> usize {
        self.s.rows()
    }

    pub fn rhs(&self) -> Vec<Complex64> {
        self.g1.iter().chain(&self.g2).copied().collect()
    }

    pub fn solve(&self, parallel: bool) -> Result<(SolutionPair, SolveInfo)> {
        let lu = lu_factor(&self.matrix, parallel)?;
        let b = self.rhs();
        let x = lu.solve(&b)?;
        let info = SolveInfo {
            residual: relative_residual(&self.matrix, &x, &b)?,
            growth_factor: lu.growth_factor,
        };
        let m1 = self.m1();
        let sol = SolutionPair::new(self.mesh.clone(), x[..m1].to_vec(), x[m1..].to_vec())?;
        Ok((sol, info))
    }
}

/// Assembles all blocks, the load vectors and the full matrix.
pub fn build_block_system(
    mesh: &Mesh,
    media: &MediumPair,
    src: &PointSource,
    opts: &AssemblyOptions,
) -> Result<BlockSystem> {
    let (g1, g2) = assemble_rhs(mesh, src, media, opts.tau, &opts.budget)?;
    let ops = assemble_operators(mesh, media, opts)?;
    let i = assemble_i(mesh);
    system_from_blocks(mesh.clone(), ops, i, g1, g2)
}

/// Stacks precomputed blocks into a [`BlockSystem`].
pub fn system_from_blocks(
    mesh: Mesh,
    ops: OperatorBlocks,
    i: DenseMatrix,
    g1: Vec<Complex64>,
    g2: Vec<Complex64>,
) -> Result<BlockSystem> {
    let (m1, m2) = (ops.n.rows(), ops.s.rows());
    let shapes = [
        (ops.n.rows(), ops.n.cols(), m1, m1),
        (ops.k.rows(), ops.k.cols(), m2, m1),
        (ops.s.rows(), ops.s.cols(), m2, m2),
        (i.rows(), i.cols(), m2, m1),
    ];
    if shapes.iter().any(|&(r, c, er, ec)| r != er || c != ec) || g1.len() != m1 || g2.len() != m2 {
        return Err(Error::Dimension(format!("inconsistent block shapes {shapes:?}")));
    }
    let k_prime = ops.k.transpose();
    let i_prime = i.transpose();
    let mut matrix = DenseMatrix::zeros(m1 + m2, m1 + m2);
    matrix.set_block(0, 0, &ops.n, 1.0);
    for r in 0..m1 {
        for c in 0..m2 {
            matrix[(r, m1 + c)] = i_prime[(r, c)] - k_prime[(r, c)];
        }
    }
    for r in 0..m2 {
        for c in 0..m1 {
            matrix[(m1 + r, c)] = i[(r, c)] + ops.k[(r, c)];
        }
    }
    matrix.set_block(m1, m1, &ops.s, -1.0);
    Ok(BlockSystem {
        mesh,
        n: ops.n,
        k: ops.k,
        k_prime,
        s: ops.s,
        i,
        i_prime,
        g1,
        g2,
        matrix,
        stats: ops.stats,
    })
}
