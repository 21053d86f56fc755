use std::path::{Path, PathBuf};

use helicity_core::feec::centroid_vectors;
use helicity_core::fields::{axisymmetric_field, l2_error, run_on_mesh};
use helicity_core::geometry::CoeffKind;
use helicity_core::oracle::{helicity_oracle, sample_field};
use helicity_core::shapeopt::{
    boundary_density, discrete_helicity_gradient, helicity_coeff_gradient, lbfgs_optimize,
    GradientMethod, HelicityObjective, LbfgsOptions, OptStatus, ShapeOptConfig,
};
use helicity_core::vtk::VtkData;
use helicity_core::{
    generate_mesh, geometric_functionals, run_helicity, FourierSurface, FrozenPolyhedron, GridSpec,
    HelicityRun, Resolution, SolverChoice,
};
use log::info;
use rayon::prelude::*;
use serde::Serialize;

use crate::{Common, Failure, Gradient, Program};

type Outcome = Result<(), Failure>;

/// Relative FD mismatch above which `gradient --fd-check` warns.
const FD_TOL: f64 = 0.05;

fn load_surface(spec: &str) -> Result<FourierSurface, Failure> {
    match spec {
        "builtin:twisted" => Ok(FourierSurface::twisted_demo()),
        "builtin:circular" => Ok(FourierSurface::circular_torus(1.0, 0.1)),
        path => {
            if !Path::new(path).exists() {
                return Err(Failure::Input(format!(
                    "surface file {path} does not exist"
                )));
            }
            Ok(FourierSurface::from_json_file(path)?)
        }
    }
}

fn single_res(common: &Common) -> Result<Resolution, Failure> {
    match common.res[..] {
        [r] => Ok(r),
        _ => Err(Failure::Input(
            "this command takes exactly one --res".into(),
        )),
    }
}

fn out_path(common: &Common, name: &str) -> Result<PathBuf, Failure> {
    std::fs::create_dir_all(&common.out)?;
    Ok(common.out.join(name))
}

fn write_json(path: PathBuf, value: &impl Serialize) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Input(e.to_string()))?;
    std::fs::write(&path, text + "\n")?;
    info!("wrote {}", path.display());
    Ok(())
}

fn write_vtk(path: PathBuf, data: &VtkData, title: &str) -> Outcome {
    data.write(&path, title)?;
    info!("wrote {}", path.display());
    Ok(())
}

pub fn mesh(common: &Common, report: bool) -> Outcome {
    let surface = load_surface(&common.surface)?;
    let mesh = generate_mesh(&surface, single_res(common)?)?;
    write_vtk(
        out_path(common, "mesh.vtk")?,
        &VtkData::from_mesh(&mesh),
        "toroidal mesh",
    )?;
    println!(
        "{} vertices, {} tetrahedra, h = {:.4}",
        mesh.n_vertices(),
        mesh.n_tets(),
        mesh.max_edge_length()
    );
    if report {
        let geo = geometric_functionals(&surface, GridSpec::default())?;
        write_json(out_path(common, "geometry.json")?, &geo)?;
    }
    Ok(())
}

fn field_vtk(run: &HelicityRun) -> Result<VtkData, Failure> {
    let mut d = VtkData::from_mesh(&run.mesh);
    for (name, f) in [
        ("B_curl", &run.b_curl),
        ("B_div", &run.b_div),
        ("A1", &run.a1),
        ("A2", &run.a2),
    ] {
        d.cell_vectors
            .insert(name.into(), centroid_vectors(&run.mesh, &run.topo, f)?);
    }
    Ok(d)
}

pub fn helicity(common: &Common) -> Outcome {
    let surface = load_surface(&common.surface)?;
    let run = run_helicity(&surface, single_res(common)?, common.solver.into())?;
    let r = &run.report;
    write_json(out_path(common, "helicity.json")?, r)?;
    write_vtk(
        out_path(common, "fields.vtk")?,
        &field_vtk(&run)?,
        "harmonic fields and potentials",
    )?;
    println!("H_l2   = {:.10e}", r.h_l2);
    println!("H_circ = {:.10e}", r.h_circ);
    println!(
        "|H_l2 - H_circ| / |H_l2| = {:.3e}",
        (r.h_l2 - r.h_circ).abs() / r.h_l2.abs()
    );
    Ok(())
}

#[derive(Serialize)]
struct ConvergenceRow {
    n_rho: usize,
    n_u: usize,
    n_v: usize,
    h: f64,
    /// Relative `L²` error of `B_curl`, axisymmetric surfaces only.
    b_error: Option<f64>,
    h_l2: f64,
    h_circ: f64,
    consistency: f64,
    /// `|H_l2 - H_l2(finest)|`.
    diff_to_finest: f64,
}

/// Least-squares slope of `log y` against `log x`.
fn observed_order(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| {
        (a + x.ln() / n, b + y.ln() / n)
    });
    let num: f64 = pts.iter().map(|(x, y)| (x.ln() - mx) * (y.ln() - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x.ln() - mx).powi(2)).sum();
    num / den
}

pub fn convergence(common: &Common, freeze: bool) -> Outcome {
    let surface = load_surface(&common.surface)?;
    let mut ladder = common.res.clone();
    ladder.sort_by_key(|r| r.n_rho * r.n_u * r.n_v);
    let solver: SolverChoice = common.solver.into();
    let axisymmetric = surface.modes.iter().all(|&(_, n)| n == 0);
    let coarsest = ladder[0];
    let poly = FrozenPolyhedron::new(&surface, coarsest.n_u, coarsest.n_v);
    let runs: Vec<Result<(HelicityRun, Option<f64>), Failure>> = ladder
        .par_iter()
        .map(|&res| {
            let mesh = if freeze {
                generate_mesh(&poly, res)?
            } else {
                generate_mesh(&surface, res)?
            };
            let run = run_on_mesh(mesh, solver)?;
            let err = if axisymmetric && !freeze {
                let (e, n) = l2_error(&run.mesh, &run.topo, &run.b_curl, axisymmetric_field)?;
                Some(e / n)
            } else {
                None
            };
            Ok((run, err))
        })
        .collect();
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;
    let finest = runs.last().map(|(r, _)| r.report.h_l2).unwrap_or(0.0);
    let path = out_path(common, "convergence.csv")?;
    let mut w = csv::Writer::from_path(&path)?;
    let mut errors = vec![];
    for ((run, err), res) in runs.iter().zip(&ladder) {
        let r = &run.report;
        let row = ConvergenceRow {
            n_rho: res.n_rho,
            n_u: res.n_u,
            n_v: res.n_v,
            h: r.h_max,
            b_error: *err,
            h_l2: r.h_l2,
            h_circ: r.h_circ,
            consistency: (r.h_l2 - r.h_circ).abs(),
            diff_to_finest: (r.h_l2 - finest).abs(),
        };
        println!(
            "{res}  h={:.4}  H_l2={:.8e}  H_circ={:.8e}",
            row.h, row.h_l2, row.h_circ
        );
        if let Some(e) = err {
            errors.push((r.h_max, *e));
        }
        w.serialize(row)?;
    }
    w.flush()?;
    if errors.len() >= 2 {
        println!(
            "observed order of the B_curl error: {:.3}",
            observed_order(&errors)
        );
    }
    Ok(())
}

#[derive(Serialize)]
struct CoeffEntry {
    index: usize,
    kind: &'static str,
    m: u32,
    n: i32,
    value: f64,
    boundary: f64,
    exact: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fd: Option<f64>,
}

#[derive(Serialize)]
struct GradientReport {
    h_l2: f64,
    coefficients: Vec<CoeffEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_fd_mismatch_boundary: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_fd_mismatch_exact: Option<f64>,
}

pub fn gradient(common: &Common, fd_step: Option<f64>) -> Outcome {
    let surface = load_surface(&common.surface)?;
    let res = single_res(common)?;
    let solver: SolverChoice = common.solver.into();
    let run = run_helicity(&surface, res, solver)?;
    let dens = boundary_density(&run, &run.b_curl, &run.a2)?;
    let gb = helicity_coeff_gradient(&run, &surface)?;
    let ge = discrete_helicity_gradient(&run, &surface)?;
    let free = ShapeOptConfig::new(&surface, res).free;
    let coeffs = surface.coefficients();
    let fd: Vec<Option<f64>> = match fd_step {
        None => vec![None; coeffs.len()],
        Some(step) => {
            let probe = |k: usize, sign: f64| -> Result<f64, Failure> {
                let mut c = coeffs.clone();
                c[k] += sign * step;
                Ok(run_helicity(&surface.with_coefficients(&c)?, res, solver)?
                    .report
                    .h_l2)
            };
            let vals: Vec<Result<Option<f64>, Failure>> = (0..coeffs.len())
                .into_par_iter()
                .map(|k| {
                    if free.contains(&k) {
                        Ok(Some((probe(k, 1.0)? - probe(k, -1.0)?) / (2.0 * step)))
                    } else {
                        Ok(None)
                    }
                })
                .collect();
            vals.into_iter().collect::<Result<_, _>>()?
        }
    };
    let mismatch = |g: &[f64]| {
        fd.iter()
            .zip(g)
            .filter_map(|(f, g)| f.map(|f| (g - f).abs() / f.abs()))
            .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))))
    };
    let report = GradientReport {
        h_l2: run.report.h_l2,
        coefficients: (0..coeffs.len())
            .map(|k| {
                let p = surface.perturbation_at(k);
                CoeffEntry {
                    index: k,
                    kind: match p.kind {
                        CoeffKind::R => "r_cos",
                        CoeffKind::Z => "z_sin",
                    },
                    m: p.m,
                    n: p.n,
                    value: coeffs[k],
                    boundary: gb[k],
                    exact: ge[k],
                    fd: fd[k],
                }
            })
            .collect(),
        max_fd_mismatch_boundary: mismatch(&gb),
        max_fd_mismatch_exact: mismatch(&ge),
    };
    for c in &report.coefficients {
        let fd = c.fd.map_or(String::new(), |f| format!("  fd={f:+.6e}"));
        println!(
            "{:>5}({:>2},{:>3})  boundary={:+.6e}  exact={:+.6e}{fd}",
            c.kind, c.m, c.n, c.boundary, c.exact
        );
    }
    if let (Some(b), Some(e)) = (
        report.max_fd_mismatch_boundary,
        report.max_fd_mismatch_exact,
    ) {
        println!(
            "max relative FD mismatch: boundary {:.2}%, exact {:.2e}",
            100.0 * b,
            e
        );
        if b > FD_TOL {
            eprintln!("warning: boundary-formula gradient differs from finite differences by more than {:.0}%", 100.0 * FD_TOL);
        }
    }
    write_json(out_path(common, "gradient.json")?, &report)?;
    let mut vtk = VtkData::boundary_surface(&run.mesh, &run.topo);
    vtk.cell_scalars
        .insert("density".into(), dens.density.clone());
    vtk.cell_scalars
        .insert("normal_b".into(), dens.normal_b.clone());
    write_vtk(
        out_path(common, "density.vtk")?,
        &vtk,
        "shape gradient density 2 B.A2",
    )
}

pub struct OptArgs {
    pub sign: Option<f64>,
    pub iters: usize,
    pub program: Program,
    pub weight: f64,
    pub gradient: Gradient,
    pub initial_step: f64,
}

pub fn optimize(common: &Common, args: &OptArgs) -> Outcome {
    let surface = load_surface(&common.surface)?;
    let res = single_res(common)?;
    let mut cfg = match args.program {
        Program::Bvc => ShapeOptConfig::bounded_volume(&surface, res, args.weight)?,
        Program::Bpc => ShapeOptConfig::bounded_area(&surface, res, args.weight)?,
        Program::Free => ShapeOptConfig::new(&surface, res),
    };
    cfg.solver = common.solver.into();
    cfg.gradient = match args.gradient {
        Gradient::Boundary => GradientMethod::Boundary,
        Gradient::Adjoint => GradientMethod::Adjoint,
    };
    cfg.objective_sign = match args.sign {
        Some(s) if s == 1.0 || s == -1.0 => s,
        Some(s) => return Err(Failure::Input(format!("--sign must be 1 or -1, got {s}"))),
        None => {
            let h = run_helicity(&surface, res, cfg.solver)?.report.h_l2;
            if h >= 0.0 {
                -1.0
            } else {
                1.0
            }
        }
    };
    let mut obj = HelicityObjective::new(surface, cfg);
    let x0 = obj.initial_point();
    let opts = LbfgsOptions {
        max_iter: args.iters,
        initial_step: args.initial_step,
        ..Default::default()
    };
    let trace = lbfgs_optimize(&mut obj, &x0, &opts)?;
    let path = out_path(common, "trace.csv")?;
    let mut w = csv::Writer::from_path(&path)?;
    for r in &trace.records {
        println!(
            "{:>3}  H={:+.6e}  J={:+.6e}  volume={:.5}  area={:.5}  min_radius={:.4}",
            r.iter, r.h, r.j, r.volume, r.area, r.min_radius
        );
        w.serialize(r)?;
    }
    w.flush()?;
    let last = obj.surface_at(&trace.last().x)?;
    std::fs::write(
        out_path(common, "final_surface.json")?,
        last.to_json_string() + "\n",
    )?;
    println!(
        "status: {:?}, {} pipeline evaluations",
        trace.status, obj.evaluations
    );
    match trace.status {
        OptStatus::LineSearchFailed => Err(Failure::NoConvergence(
            "line search failed to decrease the objective".into(),
        )),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct OracleReport {
    h_oracle: f64,
    h_l2: f64,
    relative_difference: f64,
    n_points: usize,
}

pub fn oracle(common: &Common) -> Outcome {
    let surface = load_surface(&common.surface)?;
    let run = run_helicity(&surface, single_res(common)?, common.solver.into())?;
    let q = sample_field(&run.mesh, &run.topo, &run.b_div)?;
    let h = helicity_oracle(&q)?;
    let report = OracleReport {
        h_oracle: h,
        h_l2: run.report.h_l2,
        relative_difference: (h - run.report.h_l2).abs() / h.abs(),
        n_points: q.len(),
    };
    println!(
        "H_oracle = {:.10e}\nH_l2     = {:.10e}",
        report.h_oracle, report.h_l2
    );
    write_json(out_path(common, "oracle.json")?, &report)
}
