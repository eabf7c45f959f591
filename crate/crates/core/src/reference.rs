//! Fine uniform-mesh reference solutions and relative trace errors.

use std::fmt::Write as _;

use num_complex::Complex64;

use crate::adapt::Problem;
use crate::assembly::{build_block_system, SolutionPair, SolveInfo};
use crate::error::{Error, Result};
use crate::geometry::{fmt17, Mesh};
use crate::quadrature::{gauss, AdaptiveBudget};

/// Budget of the reference solve.
pub const REFERENCE_BUDGET: AdaptiveBudget = AdaptiveBudget {
    rel_tol: 1e-10,
    abs_tol: 1e-14,
    max_depth: 12,
};

/// Gauss points per reference element in the error norms.
const NORM_POINTS: usize = 4;

/// Solution on a dense uniform mesh with its provenance.
#[derive(Debug, Clone)]
pub struct ReferenceSolution {
    pub solution: SolutionPair,
    pub m_ref: usize,
    pub budget: AdaptiveBudget,
    pub solve: SolveInfo,
}

/// Single uniform-mesh solve with `m_ref` nodes and the tightened budget.
pub fn reference_solve(problem: &Problem, m_ref: usize) -> Result<ReferenceSolution> {
    reference_solve_with(problem, m_ref, REFERENCE_BUDGET)
}

pub fn reference_solve_with(problem: &Problem, m_ref: usize, budget: AdaptiveBudget) -> Result<ReferenceSolution> {
    let mesh = Mesh::initial(problem.curve.clone(), m_ref).map_err(|e| Error::Reference(e.to_string()))?;
    let mut opts = problem.assembly;
    opts.budget = budget;
    let system = build_block_system(&mesh, &problem.media, &problem.source, &opts)?;
    let (solution, solve) = system.solve(opts.parallel)?;
    Ok(ReferenceSolution {
        solution,
        m_ref,
        budget,
        solve,
    })
}

/// Traces of `sol` at curve parameter `t`: `φ⁽¹⁾` affine in the element
/// parameter, `φ⁽²⁾` the containing element's value.
pub fn trace_at(sol: &SolutionPair, t: f64) -> (Complex64, Complex64) {
    let m = sol.mesh.locate(t);
    let e = sol.mesh.element(m);
    let t = t.rem_euclid(sol.mesh.curve().period());
    let u = (2.0 * (t - e.t_start) / (e.t_end - e.t_start) - 1.0).clamp(-1.0, 1.0);
    (sol.phi1(m, u), sol.c2[m])
}

/// `(ê⁽¹⁾, ê⁽²⁾) = (‖φ_ref⁽ⁱ⁾ − φ⁽ⁱ⁾‖ / ‖φ_ref⁽ⁱ⁾‖)` in `L²(Γ)`, integrated by
/// composite Gauss on the reference mesh with both solutions evaluated at
/// the same curve parameters.
pub fn relative_errors(sol: &SolutionPair, reference: &ReferenceSolution) -> Result<(f64, f64)> {
    if sol.mesh.curve() != reference.solution.mesh.curve() {
        return Err(Error::Reference(
            "solution and reference live on different curves".into(),
        ));
    }
    if reference.m_ref < sol.mesh.len() {
        return Err(Error::Reference(format!(
            "reference mesh ({} nodes) is coarser than the compared solution ({} nodes)",
            reference.m_ref,
            sol.mesh.len()
        )));
    }
    let r = &reference.solution;
    let rule = gauss(NORM_POINTS);
    let (mut d1, mut n1, mut d2, mut n2) = (0.0, 0.0, 0.0, 0.0);
    for (m, e) in r.mesh.elements().iter().enumerate() {
        for (&u, &w) in rule.nodes.iter().zip(&rule.weights) {
            let wt = w * 0.5 * e.length;
            let t = e.t_start + 0.5 * (u + 1.0) * (e.t_end - e.t_start);
            let (a1, a2) = (r.phi1(m, u), r.c2[m]);
            let (b1, b2) = trace_at(sol, t);
            d1 += wt * (a1 - b1).norm_sqr();
            n1 += wt * a1.norm_sqr();
            d2 += wt * (a2 - b2).norm_sqr();
            n2 += wt * a2.norm_sqr();
        }
    }
    if !(n1 > 0.0 && n2 > 0.0) {
        return Err(Error::Reference("reference traces vanish".into()));
    }
    Ok(((d1 / n1).sqrt(), (d2 / n2).sqrt()))
}

/// Trace CSV with one row per element, sampled at the parameter midpoint:
/// `t, s_arclength, Re φ⁽¹⁾, Im φ⁽¹⁾, Re φ⁽²⁾, Im φ⁽²⁾`, where `s` is the
/// polygonal arc length up to that point.
pub fn trace_csv(sol: &SolutionPair) -> String {
    let mut out = String::from("t,s_arclength,re_phi1,im_phi1,re_phi2,im_phi2\n");
    let mut s = 0.0;
    for (m, e) in sol.mesh.elements().iter().enumerate() {
        let t = 0.5 * (e.t_start + e.t_end);
        let p1 = sol.phi1(m, 0.0);
        let p2 = sol.c2[m];
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt17(t),
            fmt17(s + 0.5 * e.length),
            fmt17(p1.re),
            fmt17(p1.im),
            fmt17(p2.re),
            fmt17(p2.im)
        );
        s += e.length;
    }
    out
}
