//! `helicity`: meshes, harmonic fields, helicity, shape gradients and
//! boundary optimization for toroidal domains given by Fourier surfaces.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use helicity_core::{Error, Resolution, SolverChoice};

#[derive(Parser, Debug)]
#[command(
    name = "helicity",
    version,
    about = "Harmonic-field helicity of toroidal domains"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Surface JSON file, or `builtin:twisted` / `builtin:circular`.
    #[arg(long, default_value = "builtin:twisted")]
    pub surface: String,
    /// Mesh resolution `n_rho,n_u,n_v`; repeat it to give `convergence`
    /// several.
    #[arg(long, default_value = "3,12,36", value_parser = parse_res, action = clap::ArgAction::Append)]
    pub res: Vec<Resolution>,
    #[arg(long, value_enum, default_value_t = Solver::Direct)]
    pub solver: Solver,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Solver {
    Direct,
    Minres,
}

impl From<Solver> for SolverChoice {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Direct => SolverChoice::Direct,
            Solver::Minres => SolverChoice::Minres,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Program {
    /// Volume capped at its initial value.
    Bvc,
    /// Surface area capped at its initial value.
    Bpc,
    /// No constraints.
    Free,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Gradient {
    Boundary,
    Adjoint,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tetrahedral mesh as VTK, optionally with the geometric report.
    Mesh {
        #[command(flatten)]
        common: Common,
        /// Also write area, volume and minimal curvature radius as JSON.
        #[arg(long)]
        report: bool,
    },
    /// Harmonic fields, vector potentials and both helicity formulas.
    Helicity {
        #[command(flatten)]
        common: Common,
    },
    /// Sweep over resolutions; CSV of errors and helicities.
    Convergence {
        #[command(flatten)]
        common: Common,
        /// Mesh the polyhedron sampled at the coarsest resolution instead of
        /// the smooth surface.
        #[arg(long)]
        freeze_polyhedron: bool,
    },
    /// Boundary shape-gradient density and coefficient gradient.
    Gradient {
        #[command(flatten)]
        common: Common,
        /// Compare with central finite differences of the full pipeline.
        #[arg(long)]
        fd_check: bool,
        #[arg(long, default_value_t = 1e-4)]
        fd_step: f64,
    },
    /// L-BFGS on the surface coefficients with penalized constraints.
    Optimize {
        #[command(flatten)]
        common: Common,
        /// Minimize `sign · H`; by default the sign that increases `|H|`.
        #[arg(long, allow_hyphen_values = true)]
        sign: Option<f64>,
        #[arg(long, default_value_t = 10)]
        iters: usize,
        #[arg(long, value_enum, default_value_t = Program::Bvc)]
        program: Program,
        #[arg(long, default_value_t = 1e3)]
        weight: f64,
        #[arg(long, value_enum, default_value_t = Gradient::Boundary)]
        gradient: Gradient,
        /// Max-norm of the first trial step.
        #[arg(long, default_value_t = 1e-2)]
        initial_step: f64,
    },
    /// Direct Biot-Savart helicity of `B_div` for comparison.
    Oracle {
        #[command(flatten)]
        common: Common,
    },
}

fn parse_res(s: &str) -> Result<Resolution, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Usage or input problems exit with 1, numerical failures with 2 and
/// non-convergence with 3.
pub enum Failure {
    Input(String),
    Numerical(String),
    NoConvergence(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvertedCell { ref tets } => {
                let shown: Vec<String> = tets.iter().take(20).map(|t| t.to_string()).collect();
                let more = if tets.len() > 20 {
                    format!(" and {} more", tets.len() - 20)
                } else {
                    String::new()
                };
                Failure::Numerical(format!("inverted cell(s): tets {}{more}", shown.join(", ")))
            }
            Error::DegenerateFrame { .. }
            | Error::NonManifold { .. }
            | Error::CutNotFound(_)
            | Error::NotPositiveDefinite
            | Error::Singular(_) => Failure::Numerical(e.to_string()),
            Error::NoConvergence { .. } => Failure::NoConvergence(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Mesh { common, report } => commands::mesh(&common, report),
        Command::Helicity { common } => commands::helicity(&common),
        Command::Convergence {
            common,
            freeze_polyhedron,
        } => commands::convergence(&common, freeze_polyhedron),
        Command::Gradient {
            common,
            fd_check,
            fd_step,
        } => commands::gradient(&common, fd_check.then_some(fd_step)),
        Command::Optimize {
            common,
            sign,
            iters,
            program,
            weight,
            gradient,
            initial_step,
        } => commands::optimize(
            &common,
            &commands::OptArgs {
                sign,
                iters,
                program,
                weight,
                gradient,
                initial_step,
            },
        ),
        Command::Oracle { common } => commands::oracle(&common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("numerical failure: {m}");
            ExitCode::from(2)
        }
        Err(Failure::NoConvergence(m)) => {
            eprintln!("no convergence: {m}");
            ExitCode::from(3)
        }
    }
}
