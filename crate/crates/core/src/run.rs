//! End-to-end runs: reference, adaptive levels, optional uniform comparison
//! and field sampling, with every artifact written as CSV.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::adapt::{adaptive_solve_with, AdaptiveRun, LevelReport};
use crate::assembly::{build_block_system, SolutionPair};
use crate::config::{FieldGrid, ProblemConfig};
use crate::error::{Error, Result};
use crate::geometry::{fmt17, Mesh};
use crate::kernels::{eval_field, Domain};
use crate::reference::{reference_solve, relative_errors, trace_csv, ReferenceSolution};

/// Switches that are not part of the problem definition.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Assemble and factor on the rayon pool.
    pub parallel: bool,
    /// Replaces the configured level count.
    pub levels: Option<usize>,
    /// Replaces the configured output directory.
    pub output_dir: Option<PathBuf>,
    /// Writes per-pair quadrature records of the last level.
    pub instrument: bool,
}

/// Uniform-mesh comparison run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformComparison {
    pub m: usize,
    pub h_max: f64,
    pub e1_hat: f64,
    pub e2_hat: f64,
}

/// What a run produced.
#[derive(Debug, Clone)]
pub struct RunSummary {
    /// Level rows with the errors filled in when a reference exists.
    pub reports: Vec<LevelReport>,
    pub uniform: Option<UniformComparison>,
    pub output_dir: PathBuf,
    pub files: Vec<PathBuf>,
}

/// Loads, validates and runs a configuration file.
pub fn run_file(path: &Path, opts: &RunOptions) -> Result<RunSummary> {
    let cfg = ProblemConfig::load(path)?;
    run_config(&cfg, opts, |_| {})
}

/// Runs `cfg`, calling `progress` once per finished level.
pub fn run_config(
    cfg: &ProblemConfig,
    opts: &RunOptions,
    mut progress: impl FnMut(&LevelReport),
) -> Result<RunSummary> {
    let mut cfg = cfg.clone();
    if let Some(levels) = opts.levels {
        cfg.levels = levels;
        cfg.defaulted.remove("adapt.levels");
    }
    if let Some(dir) = &opts.output_dir {
        cfg.output_dir = dir.clone();
        cfg.defaulted.remove("output.dir");
    }
    cfg.validate()?;
    let mut problem = cfg.problem(opts.parallel)?;
    let out = cfg.output_dir.clone();
    std::fs::create_dir_all(&out)?;
    let mut files = Vec::new();
    let mut emit = |name: &str, body: String| -> Result<()> {
        let path = out.join(name);
        std::fs::write(&path, body)?;
        files.push(path);
        Ok(())
    };

    emit("run_manifest.txt", manifest(&cfg, opts))?;

    let reference = cfg.m_ref.map(|m| reference_solve(&problem, m)).transpose()?;
    if let Some(r) = &reference {
        emit("reference_trace.csv", trace_csv(&r.solution))?;
    }

    let mut reports = Vec::new();
    let run = adaptive_solve_with(&problem, &cfg.settings(), |report, sol, _| {
        let mut row = report.clone();
        if let Some(r) = &reference {
            let (e1, e2) = relative_errors(sol, r).map_err(|e| e.at_level(report.level))?;
            row.e1_hat = Some(e1);
            row.e2_hat = Some(e2);
        }
        progress(&row);
        reports.push(row);
        Ok(())
    })?;

    emit("levels.csv", levels_csv(&reports))?;
    emit("trace_final.csv", trace_csv(run.final_solution()))?;
    emit("mesh_final.csv", final_mesh(&run).to_csv())?;

    // A uniform mesh as fine as the reference would only be compared with itself.
    let uniform = match (cfg.uniform_m, &reference) {
        (Some(m), Some(r)) if m < r.m_ref => {
            let u = uniform_comparison(&cfg, &problem, m, r)?;
            emit("uniform.csv", uniform_csv(&u))?;
            Some(u)
        }
        _ => None,
    };

    if let Some(grid) = &cfg.field {
        let (re, im) = field_csv(&cfg, run.final_solution(), grid, opts.parallel)?;
        emit("field_real.csv", re)?;
        emit("field_imag.csv", im)?;
    }

    if opts.instrument {
        problem.assembly.instrument = true;
        let fine = run.final_solution().mesh.clone();
        let system = build_block_system(&fine, &problem.media, &problem.source, &problem.assembly)?;
        let path = out.join("quadrature_records.csv");
        system.stats.write_records_csv(&path)?;
        files.push(path);
    }

    Ok(RunSummary {
        reports,
        uniform,
        output_dir: out,
        files,
    })
}

/// Coarse mesh of the last level, the one the estimator was evaluated on.
fn final_mesh(run: &AdaptiveRun) -> &Mesh {
    run.meshes.last().expect("an adaptive run has at least one level")
}

fn uniform_comparison(
    cfg: &ProblemConfig,
    problem: &crate::adapt::Problem,
    m: usize,
    reference: &ReferenceSolution,
) -> Result<UniformComparison> {
    let mesh = Mesh::initial(cfg.geometry.curve()?, m)?;
    let system = build_block_system(&mesh, &problem.media, &problem.source, &problem.assembly)?;
    let (sol, _) = system.solve(problem.assembly.parallel)?;
    let (e1_hat, e2_hat) = relative_errors(&sol, reference)?;
    Ok(UniformComparison {
        m,
        h_max: mesh.h_max(),
        e1_hat,
        e2_hat,
    })
}

fn opt17(x: Option<f64>) -> String {
    x.map(fmt17).unwrap_or_default()
}

/// `level,M,h_max,h_min,eta_tilde,marked,e1_hat,e2_hat`; errors are empty
/// without a reference.
pub fn levels_csv(reports: &[LevelReport]) -> String {
    let mut s = String::from("level,M,h_max,h_min,eta_tilde,marked,e1_hat,e2_hat\n");
    for r in reports {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.level,
            r.m,
            fmt17(r.h_max),
            fmt17(r.h_min),
            fmt17(r.eta_tilde),
            r.marked,
            opt17(r.e1_hat),
            opt17(r.e2_hat)
        );
    }
    s
}

fn uniform_csv(u: &UniformComparison) -> String {
    format!(
        "M,h_max,e1_hat,e2_hat\n{},{},{},{}\n",
        u.m,
        fmt17(u.h_max),
        fmt17(u.e1_hat),
        fmt17(u.e2_hat)
    )
}

fn manifest(cfg: &ProblemConfig, opts: &RunOptions) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# hyperbem {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# mode = {}", if opts.parallel { "parallel" } else { "serial" });
    if let (Some(u), Some(r)) = (cfg.uniform_m, cfg.m_ref) {
        if u >= r {
            let _ = writeln!(
                s,
                "# uniform comparison skipped: uniform.m = {u} is not below reference.m_ref = {r}"
            );
        }
    }
    s.push_str(&cfg.to_text());
    s
}

/// Samples the field on the configured grid. Points within one element
/// length of the boundary carry `nan`, as do points whose evaluation fails.
fn field_csv(cfg: &ProblemConfig, sol: &SolutionPair, grid: &FieldGrid, parallel: bool) -> Result<(String, String)> {
    let media = cfg.media()?;
    let src = cfg.source();
    let points: Vec<[f64; 2]> = (0..grid.ny)
        .flat_map(|j| {
            (0..grid.nx).map(move |i| {
                let x = grid.x_min + (grid.x_max - grid.x_min) * i as f64 / (grid.nx - 1) as f64;
                let y = grid.y_min + (grid.y_max - grid.y_min) * j as f64 / (grid.ny - 1) as f64;
                [x, y]
            })
        })
        .collect();
    let sample = |x: &[f64; 2]| -> Result<(Domain, Option<Complex64>)> {
        let domain = if sol.mesh.curve().contains(*x) {
            Domain::Interior
        } else {
            Domain::Exterior
        };
        let (near, d) = sol.mesh.nearest_element(*x);
        let masked = d < sol.mesh.element(near).length;
        if masked || (src.location == *x && src.domain == domain) {
            return Ok((domain, None));
        }
        match eval_field(*x, sol, &src, &media, domain, cfg.tau) {
            Ok(v) => Ok((domain, Some(v.value))),
            Err(Error::Coincident { .. }) => Ok((domain, None)),
            Err(e) => Err(e),
        }
    };
    let values: Vec<_> = if parallel {
        points.par_iter().map(sample).collect::<Result<_>>()?
    } else {
        points.iter().map(sample).collect::<Result<_>>()?
    };
    let mut re = String::from("x,y,value,domain_id\n");
    let mut im = re.clone();
    for (x, (domain, v)) in points.iter().zip(values) {
        let (a, b) = v.map_or(("nan".to_string(), "nan".to_string()), |z| (fmt17(z.re), fmt17(z.im)));
        let _ = writeln!(re, "{},{},{},{}", fmt17(x[0]), fmt17(x[1]), a, domain.id());
        let _ = writeln!(im, "{},{},{},{}", fmt17(x[0]), fmt17(x[1]), b, domain.id());
    }
    Ok((re, im))
}
