//! Two-level `h`–`h/2` error estimation and the adaptive refinement loop.
//!
//! Each level solves on the uniform refinement `Γ̂_h` of the current mesh
//! `Γ_h`, projects the fine traces onto the coarse spaces, and measures the
//! local projection defects. Dörfler marking on `Γ_h` followed by bisection
//! produces the next mesh.

use num_complex::Complex64;

use crate::assembly::{build_block_system, AssemblyOptions, SolveInfo};
use crate::error::{Error, Result};
use crate::geometry::{Curve, Mesh};
use crate::kernels::{MediumPair, PointSource};
use crate::linalg::{lu_solve, DenseMatrix};

pub use crate::assembly::SolutionPair;

/// Local indicators on the coarse mesh and the total estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorIndicators {
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
    /// `η̃ = (Σ ρ⁽¹⁾ + ρ⁽²⁾)^{1/2}`.
    pub eta_tilde: f64,
}

impl ErrorIndicators {
    pub fn from_parts(rho1: Vec<f64>, rho2: Vec<f64>) -> Result<Self> {
        if rho1.len() != rho2.len() {
            return Err(Error::Dimension(format!("{} vs {} indicators", rho1.len(), rho2.len())));
        }
        if rho1.iter().chain(&rho2).any(|r| !(*r >= 0.0)) {
            return Err(Error::Validation("indicators must be non-negative".into()));
        }
        let eta_tilde = rho1.iter().chain(&rho2).sum::<f64>().sqrt();
        Ok(Self { rho1, rho2, eta_tilde })
    }

    /// `ρ⁽¹⁾ + ρ⁽²⁾` per element.
    pub fn totals(&self) -> Vec<f64> {
        self.rho1.iter().zip(&self.rho2).map(|(a, b)| a + b).collect()
    }
}

/// One row of the convergence table.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelReport {
    pub level: usize,
    /// Node count of the coarse mesh `Γ_h⁽ℓ⁾`.
    pub m: usize,
    pub h_max: f64,
    pub h_min: f64,
    pub eta_tilde: f64,
    pub marked: usize,
    pub e1_hat: Option<f64>,
    pub e2_hat: Option<f64>,
    pub solve: SolveInfo,
}

/// Checks that `fine` is the uniform refinement of `coarse`.
fn check_lineage(fine: &Mesh, coarse: &Mesh) -> Result<()> {
    let parents = fine
        .parents()
        .ok_or_else(|| Error::Validation("fine mesh carries no parent lineage".into()))?;
    let ok = fine.len() == 2 * coarse.len()
        && parents.iter().enumerate().all(|(j, &p)| p == j / 2)
        && (0..coarse.len()).all(|e| fine.element(2 * e).t_start == coarse.element(e).t_start);
    if !ok {
        return Err(Error::Validation(format!(
            "mesh of {} elements is not the uniform refinement of the {}-element mesh",
            fine.len(),
            coarse.len()
        )));
    }
    Ok(())
}

/// Coarse hats restricted to the two children of coarse element `e`: values
/// at (start, midpoint, end) are `(1, ½, 0)` and `(0, ½, 1)`, affine on each
/// child in its own parameter.
const HALF: f64 = 0.5;

/// `∫ f g` over a segment of length `len` for affine `f`, `g` given by their
/// end values.
#[inline]
fn affine_product(len: f64, f: [Complex64; 2], g: [f64; 2]) -> Complex64 {
    (f[0] * (2.0 * g[0] + g[1]) + f[1] * (g[0] + 2.0 * g[1])) * (len / 6.0)
}

/// `L²` projection of the fine P1 trace onto the coarse P1 space, with both
/// spaces integrated on the fine polygon.
pub fn project_p1(fine: &SolutionPair, coarse: &Mesh) -> Result<Vec<Complex64>> {
    check_lineage(&fine.mesh, coarse)?;
    let m = coarse.len();
    let mut mass = DenseMatrix::zeros(m, m);
    let mut rhs = vec![Complex64::new(0.0, 0.0); m];
    for e in 0..m {
        let (a, b) = coarse.element_nodes(e);
        let (l1, l2) = (fine.mesh.element(2 * e).length, fine.mesh.element(2 * e + 1).length);
        // coarse hats on the children, [start, end] values per child
        let hat_a = [[1.0, HALF], [HALF, 0.0]];
        let hat_b = [[0.0, HALF], [HALF, 1.0]];
        let fine_vals = [
            [fine.c1[2 * e], fine.c1[2 * e + 1]],
            [fine.c1[2 * e + 1], fine.c1[(2 * e + 2) % (2 * m)]],
        ];
        for (child, len) in [(0, l1), (1, l2)] {
            let ha = hat_a[child];
            let hb = hat_b[child];
            let c = |x: [f64; 2]| [Complex64::new(x[0], 0.0), Complex64::new(x[1], 0.0)];
            mass[(a, a)] += affine_product(len, c(ha), ha);
            mass[(a, b)] += affine_product(len, c(ha), hb);
            mass[(b, a)] += affine_product(len, c(hb), ha);
            mass[(b, b)] += affine_product(len, c(hb), hb);
            rhs[a] += affine_product(len, fine_vals[child], ha);
            rhs[b] += affine_product(len, fine_vals[child], hb);
        }
    }
    lu_solve(&mass, &rhs)
}

/// `L²` projection of the fine P0 trace: length-weighted child means.
pub fn project_p0(fine: &SolutionPair, coarse: &Mesh) -> Result<Vec<Complex64>> {
    check_lineage(&fine.mesh, coarse)?;
    Ok((0..coarse.len())
        .map(|e| {
            let (l1, l2) = (fine.mesh.element(2 * e).length, fine.mesh.element(2 * e + 1).length);
            child_mean(l1, fine.c2[2 * e], l2, fine.c2[2 * e + 1])
        })
        .collect())
}

#[inline]
fn child_mean(l1: f64, v1: Complex64, l2: f64, v2: Complex64) -> Complex64 {
    (v1 * l1 + v2 * l2) / (l1 + l2)
}

/// `ρ⁽¹⁾_m = |E_m|·‖d/ds(φ̂⁽¹⁾ − Πφ̂⁽¹⁾)‖²` and `ρ⁽²⁾_m = |E_m|·‖φ̂⁽²⁾ − Πφ̂⁽²⁾‖²`
/// on each coarse element `E_m`.
pub fn local_indicators(fine: &SolutionPair, coarse: &Mesh) -> Result<ErrorIndicators> {
    let p1 = project_p1(fine, coarse)?;
    let p0 = project_p0(fine, coarse)?;
    let m = coarse.len();
    let mut rho1 = Vec::with_capacity(m);
    let mut rho2 = Vec::with_capacity(m);
    for e in 0..m {
        let (a, b) = coarse.element_nodes(e);
        let len = coarse.element(e).length;
        let (l1, l2) = (fine.mesh.element(2 * e).length, fine.mesh.element(2 * e + 1).length);
        let lifted_mid = (p1[a] + p1[b]) * HALF;
        let d_start = fine.c1[2 * e] - p1[a];
        let d_mid = fine.c1[2 * e + 1] - lifted_mid;
        let d_end = fine.c1[(2 * e + 2) % (2 * m)] - p1[b];
        let grad = (d_mid - d_start).norm_sqr() / l1 + (d_end - d_mid).norm_sqr() / l2;
        rho1.push(len * grad);
        let q = (fine.c2[2 * e] - p0[e]).norm_sqr() * l1 + (fine.c2[2 * e + 1] - p0[e]).norm_sqr() * l2;
        rho2.push(len * q);
    }
    ErrorIndicators::from_parts(rho1, rho2)
}

/// Minimal Dörfler set: the shortest prefix of elements sorted by decreasing
/// `ρ⁽¹⁾ + ρ⁽²⁾` (ties by ascending id) whose mass reaches `γ·η̃²`.
/// Returned ids are in ascending order.
pub fn dorfler_mark(ind: &ErrorIndicators, gamma: f64) -> Result<Vec<usize>> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Validation(format!(
            "Dörfler parameter must lie in (0, 1), got {gamma}"
        )));
    }
    let totals = ind.totals();
    let target = gamma * totals.iter().sum::<f64>();
    let mut order: Vec<usize> = (0..totals.len()).collect();
    order.sort_by(|&i, &j| totals[j].total_cmp(&totals[i]).then(i.cmp(&j)));
    let mut acc = 0.0;
    let mut marked = Vec::new();
    for i in order {
        if acc >= target && !marked.is_empty() {
            break;
        }
        acc += totals[i];
        marked.push(i);
    }
    marked.sort_unstable();
    Ok(marked)
}

/// Boundary, media, source and discretization settings of one problem.
#[derive(Debug, Clone)]
pub struct Problem {
    pub curve: Curve,
    pub media: MediumPair,
    pub source: PointSource,
    pub m0: usize,
    pub assembly: AssemblyOptions,
}

/// Stopping and marking parameters of the adaptive loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSettings {
    pub gamma: f64,
    /// Stop once `η̃ < σ`; `None` runs every level.
    pub sigma: Option<f64>,
    /// Number of levels `L + 1`.
    pub levels: usize,
}

impl AdaptiveSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::Validation(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if let Some(s) = self.sigma {
            if !(s > 0.0) {
                return Err(Error::Validation(format!("sigma must be positive, got {s}")));
            }
        }
        if self.levels == 0 {
            return Err(Error::Validation("at least one level is required".into()));
        }
        Ok(())
    }
}

/// Outcome of [`adaptive_solve`]: one report and fine solution per level.
#[derive(Debug, Clone)]
pub struct AdaptiveRun {
    pub reports: Vec<LevelReport>,
    pub solutions: Vec<SolutionPair>,
    /// Coarse mesh `Γ_h⁽ℓ⁾` of each level.
    pub meshes: Vec<Mesh>,
}

impl AdaptiveRun {
    /// The returned solution `φ̂_h` on the last fine mesh.
    pub fn final_solution(&self) -> &SolutionPair {
        self.solutions.last().expect("an adaptive run has at least one level")
    }
}

/// Runs the adaptive algorithm, calling `on_level` after every level.
pub fn adaptive_solve_with(
    problem: &Problem,
    settings: &AdaptiveSettings,
    mut on_level: impl FnMut(&LevelReport, &SolutionPair, &Mesh) -> Result<()>,
) -> Result<AdaptiveRun> {
    settings.validate()?;
    let mut mesh = Mesh::initial(problem.curve.clone(), problem.m0)?;
    problem.source.validate(&mesh.uniform_refine())?;
    let mut run = AdaptiveRun {
        reports: Vec::new(),
        solutions: Vec::new(),
        meshes: Vec::new(),
    };
    for level in 0..settings.levels {
        let step = || -> Result<_> {
            let fine = mesh.uniform_refine();
            let system = build_block_system(&fine, &problem.media, &problem.source, &problem.assembly)?;
            let (sol, info) = system.solve(problem.assembly.parallel)?;
            let ind = local_indicators(&sol, &mesh)?;
            let marked = dorfler_mark(&ind, settings.gamma)?;
            Ok((sol, info, ind, marked))
        };
        let (sol, info, ind, marked) = step().map_err(|e| e.at_level(level))?;
        let report = LevelReport {
            level,
            m: mesh.len(),
            h_max: mesh.h_max(),
            h_min: mesh.h_min(),
            eta_tilde: ind.eta_tilde,
            marked: marked.len(),
            e1_hat: None,
            e2_hat: None,
            solve: info,
        };
        on_level(&report, &sol, &mesh)?;
        let stop = level + 1 == settings.levels || settings.sigma.is_some_and(|s| ind.eta_tilde < s);
        let next = if stop {
            None
        } else {
            Some(mesh.bisect_elements(&marked).map_err(|e| e.at_level(level))?)
        };
        run.reports.push(report);
        run.solutions.push(sol);
        run.meshes.push(mesh.clone());
        match next {
            Some(m) => mesh = m,
            None => break,
        }
    }
    Ok(run)
}

/// [`adaptive_solve_with`] without a per-level hook.
pub fn adaptive_solve(problem: &Problem, settings: &AdaptiveSettings) -> Result<AdaptiveRun> {
    adaptive_solve_with(problem, settings, |_, _, _| Ok(()))
}
