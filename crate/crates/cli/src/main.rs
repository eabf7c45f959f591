//! `hyperbem run <config>` solves one problem and writes its CSV artifacts;
//! `hyperbem emit-examples <dir>` writes the bundled example configurations.
//!
//! Exit status: 0 on success, 2 when the input is invalid, 3 when the
//! numerics fail. The worker count follows `RAYON_NUM_THREADS`.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use hyperbem::config::{make_example_configs, ProblemConfig};
use hyperbem::run::{run_config, RunOptions};
use hyperbem::Error;

#[derive(Parser)]
#[command(
    name = "hyperbem",
    version,
    about = "Adaptive BEM for hyperbolic-metamaterial transmission problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the problem described by a config file.
    Run {
        config: PathBuf,
        /// Single-threaded assembly and factorization (bit-reproducible).
        #[arg(long)]
        serial: bool,
        /// Override the number of adaptive levels.
        #[arg(long)]
        levels: Option<usize>,
        /// Override the output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write per-pair quadrature records of the last level.
        #[arg(long)]
        instrument: bool,
    },
    /// Write ex1.cfg to ex5.cfg into a directory.
    EmitExamples { dir: PathBuf },
}

fn exit_for(context: &str, err: &Error) -> ExitCode {
    let module = match err {
        Error::Config { .. } => "config",
        Error::Source { .. } | Error::Validation(_) => "config",
        Error::Material(_) => "medium",
        Error::Geometry(_) => "geometry",
        Error::Domain { .. } => "specfun",
        Error::Quadrature(_) | Error::NonConverged { .. } => "quadrature",
        Error::SingularMatrix { .. } | Error::Dimension(_) => "linalg",
        Error::Reference(_) => "reference",
        Error::Coincident { .. } => "kernels",
        _ => "run",
    };
    eprintln!("hyperbem: {context} failed in {module}: {err}");
    if err.is_validation() {
        ExitCode::from(2)
    } else {
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::EmitExamples { dir } => match make_example_configs(&dir) {
            Ok(paths) => {
                for p in paths {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => exit_for("emit-examples", &e),
        },
        Command::Run {
            config,
            serial,
            levels,
            out,
            instrument,
        } => {
            let cfg = match ProblemConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("hyperbem: cannot read {}", config.display());
                    return match e {
                        Error::Io(_) => {
                            eprintln!("hyperbem: {e}");
                            ExitCode::from(2)
                        }
                        e => exit_for("loading the config", &e),
                    };
                }
            };
            let opts = RunOptions {
                parallel: !serial,
                levels,
                output_dir: out,
                instrument,
            };
            let start = Instant::now();
            let result = run_config(&cfg, &opts, |r| {
                let err = match (r.e1_hat, r.e2_hat) {
                    (Some(a), Some(b)) => format!("  e1={a:.4e} e2={b:.4e}"),
                    _ => String::new(),
                };
                eprintln!(
                    "level {}  M={}  h_max={:.4e}  h_min={:.4e}  eta={:.4e}  marked={}{}  ({:.1}s)",
                    r.level,
                    r.m,
                    r.h_max,
                    r.h_min,
                    r.eta_tilde,
                    r.marked,
                    err,
                    start.elapsed().as_secs_f64()
                );
            });
            match result {
                Ok(summary) => {
                    if let Some(u) = summary.uniform {
                        eprintln!("uniform M={}  e1={:.4e} e2={:.4e}", u.m, u.e1_hat, u.e2_hat);
                    }
                    for f in &summary.files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => exit_for("run", &e),
            }
        }
    }
}
