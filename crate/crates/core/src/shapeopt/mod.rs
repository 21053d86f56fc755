//! Shape derivative of the helicity and boundary optimization.
//!
//! For a boundary velocity `θ`, `dH(θ) = ∫_∂Ω 2 (B · A2) (θ · n) dS`. The
//! surface density `2 B · A2` is evaluated from the tangential traces of
//! `B_curl` and `A2` on each boundary face; the velocity generated by a
//! Fourier coefficient comes from the surface parametrization through the
//! `(u, v)` chart stored on boundary vertices.
//!
//! The traces of lowest-order fields converge slowly, so the boundary
//! formula is only a rough approximation on practical meshes. The
//! [`adjoint`] module differentiates the discrete helicity exactly and can
//! replace it in the optimizer through [`GradientMethod`].

pub mod adjoint;

pub use adjoint::{discrete_helicity_derivative, discrete_helicity_gradient, mesh_velocity};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::feec::{eval_field, FEField};
use crate::fields::{run_helicity, HelicityRun};
use crate::geometry::{geometric_functionals, geometric_gradients, FourierSurface, GridSpec};
use crate::linsolve::SolverChoice;
use crate::mesh::{Resolution, LOCAL_FACES};

/// Degree-2 rule on a triangle, barycentric points with weight 1/3 each.
const TRI_QUAD: [[f64; 3]; 3] = [
    [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
    [1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0],
    [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
];

#[derive(Clone, Debug)]
pub struct BoundaryDensity {
    pub faces: Vec<usize>,
    /// Face average of `2 B_t · A_t`.
    pub density: Vec<f64>,
    /// Face average of `B · n`, which should be small.
    pub normal_b: Vec<f64>,
    pub areas: Vec<f64>,
    /// Outward unit normals.
    pub normals: Vec<Vector3<f64>>,
}

/// Tet-local barycentric coordinates of a face quadrature point.
fn face_bary(slot: usize, q: &[f64; 3]) -> [f64; 4] {
    let mut b = [0.0; 4];
    for (k, &l) in LOCAL_FACES[slot].iter().enumerate() {
        b[l] = q[k];
    }
    b
}

pub fn boundary_density(run: &HelicityRun, b: &FEField, a: &FEField) -> Result<BoundaryDensity> {
    b.expect_level(1)?;
    a.expect_level(1)?;
    let (mesh, topo) = (&run.mesh, &run.topo);
    let mut out = BoundaryDensity {
        faces: vec![],
        density: vec![],
        normal_b: vec![],
        areas: vec![],
        normals: vec![],
    };
    for &f in &topo.boundary_faces {
        let (t, slot) = topo.boundary_face_tet(f)?;
        let tet = mesh.tets[t];
        let [p0, p1, p2] = LOCAL_FACES[slot].map(|l| mesh.vertices[tet[l]]);
        let mut n = (p1 - p0).cross(&(p2 - p0));
        let area = n.norm() / 2.0;
        n /= 2.0 * area;
        if n.dot(&(mesh.vertices[tet[slot]] - p0)) > 0.0 {
            n = -n;
        }
        let (mut dens, mut bn) = (0.0, 0.0);
        for q in &TRI_QUAD {
            let bary = face_bary(slot, q);
            let bv = eval_field(mesh, topo, b, t, &bary)?.vector();
            let av = eval_field(mesh, topo, a, t, &bary)?.vector();
            let bt = bv - n * bv.dot(&n);
            let at = av - n * av.dot(&n);
            dens += 2.0 * bt.dot(&at) / 3.0;
            bn += bv.dot(&n) / 3.0;
        }
        out.faces.push(f);
        out.density.push(dens);
        out.normal_b.push(bn);
        out.areas.push(area);
        out.normals.push(n);
    }
    Ok(out)
}

/// `Σ_f density(f) ∫_f v(x, n_f) dS` for a normal velocity `v` given as a
/// function of the quadrature point and the face normal.
pub fn shape_derivative(
    run: &HelicityRun,
    dens: &BoundaryDensity,
    normal_velocity: impl Fn(&nalgebra::Point3<f64>, &Vector3<f64>) -> f64,
) -> f64 {
    let mut g = 0.0;
    for (i, &f) in dens.faces.iter().enumerate() {
        let [a, b, c] = run.topo.faces[f].map(|v| run.mesh.vertices[v]);
        let avg: f64 = TRI_QUAD
            .iter()
            .map(|q| {
                let x = nalgebra::Point3::from(a.coords * q[0] + b.coords * q[1] + c.coords * q[2]);
                normal_velocity(&x, &dens.normals[i]) / 3.0
            })
            .sum();
        g += dens.density[i] * dens.areas[i] * avg;
    }
    g
}

/// Gradient of the discrete helicity with respect to every coefficient of the
/// surface, laid out like [`FourierSurface::coefficients`].
pub fn helicity_coeff_gradient(run: &HelicityRun, surface: &FourierSurface) -> Result<Vec<f64>> {
    let dens = boundary_density(run, &run.b_curl, &run.a2)?;
    let sign = surface.normal_sign();
    let nc = surface.n_coefficients();
    let mut grad = vec![0.0; nc];
    for (i, &f) in dens.faces.iter().enumerate() {
        let verts = run.topo.faces[f];
        let mut uv = [[0.0; 2]; 3];
        for (k, &v) in verts.iter().enumerate() {
            uv[k] = run.mesh.boundary_uv[v].ok_or(Error::MissingChart(v))?;
        }
        // unwrap the periodic chart around the first vertex
        for k in 1..3 {
            for c in 0..2 {
                let d = uv[k][c] - uv[0][c];
                uv[k][c] -= d.round();
            }
        }
        let mut face_int = vec![0.0; nc];
        for q in &TRI_QUAD {
            let u = q[0] * uv[0][0] + q[1] * uv[1][0] + q[2] * uv[2][0];
            let v = q[0] * uv[0][1] + q[1] * uv[1][1] + q[2] * uv[2][1];
            let fr = surface.frame_with_sign(u, v, sign)?;
            for (k, fi) in face_int.iter_mut().enumerate() {
                let theta = surface.basis_displacement(surface.perturbation_at(k), u, v);
                *fi += theta.dot(&fr.normal) / 3.0;
            }
        }
        for k in 0..nc {
            grad[k] += dens.density[i] * dens.areas[i] * face_int[k];
        }
    }
    Ok(grad)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    AreaMax,
    VolumeMax,
    MinRadiusMin,
}

/// Cubic hinge `weight · max(0, excess)³`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Penalty {
    pub constraint: Constraint,
    pub target: f64,
    pub weight: f64,
}

impl Penalty {
    /// Constraint violation, positive when the constraint is broken.
    fn excess(&self, area: f64, volume: f64, min_radius: f64) -> f64 {
        match self.constraint {
            Constraint::AreaMax => area - self.target,
            Constraint::VolumeMax => volume - self.target,
            Constraint::MinRadiusMin => self.target - min_radius,
        }
    }

    pub fn value(&self, area: f64, volume: f64, min_radius: f64) -> f64 {
        self.weight * self.excess(area, volume, min_radius).max(0.0).powi(3)
    }

    /// Derivative of the penalty with respect to its own functional.
    pub fn slope(&self, area: f64, volume: f64, min_radius: f64) -> f64 {
        let e = self.excess(area, volume, min_radius).max(0.0);
        let d = 3.0 * self.weight * e * e;
        if self.constraint == Constraint::MinRadiusMin {
            -d
        } else {
            d
        }
    }
}

/// Which derivative feeds the optimizer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientMethod {
    /// Boundary integral of `2 B_curl · A2`.
    #[default]
    Boundary,
    /// Exact derivative of the discrete helicity.
    Adjoint,
}

#[derive(Clone, Debug)]
pub struct ShapeOptConfig {
    pub resolution: Resolution,
    pub solver: SolverChoice,
    /// `J = objective_sign · H + penalties`; `-1` drives `H` up.
    pub objective_sign: f64,
    pub penalties: Vec<Penalty>,
    pub grid: GridSpec,
    /// Indices into the coefficient vector that the optimizer may change.
    pub free: Vec<usize>,
    pub gradient: GradientMethod,
}

impl ShapeOptConfig {
    /// Every coefficient except the inert `z_00` is free.
    pub fn new(surface: &FourierSurface, resolution: Resolution) -> Self {
        let z00 = surface.mode_index(0, 0).map(|i| surface.modes.len() + i);
        ShapeOptConfig {
            resolution,
            solver: SolverChoice::Direct,
            objective_sign: -1.0,
            penalties: vec![],
            grid: GridSpec::default(),
            free: (0..surface.n_coefficients())
                .filter(|&i| Some(i) != z00)
                .collect(),
            gradient: GradientMethod::default(),
        }
    }

    /// Volume capped at its initial value and the smoothed minimal radius of
    /// curvature kept above `0.02 · R_00`.
    pub fn bounded_volume(
        surface: &FourierSurface,
        resolution: Resolution,
        weight: f64,
    ) -> Result<Self> {
        let geo = geometric_functionals(surface, GridSpec::default())?;
        let scale = surface
            .mode_index(0, 0)
            .map_or(1.0, |i| surface.r_cos[i].abs());
        let mut cfg = Self::new(surface, resolution);
        cfg.penalties = vec![
            Penalty {
                constraint: Constraint::VolumeMax,
                target: geo.volume,
                weight,
            },
            Penalty {
                constraint: Constraint::MinRadiusMin,
                target: 0.02 * scale,
                weight,
            },
        ];
        Ok(cfg)
    }

    /// Surface area capped at its initial value, same curvature bound as
    /// [`ShapeOptConfig::bounded_volume`].
    pub fn bounded_area(
        surface: &FourierSurface,
        resolution: Resolution,
        weight: f64,
    ) -> Result<Self> {
        let mut cfg = Self::bounded_volume(surface, resolution, weight)?;
        let geo = geometric_functionals(surface, GridSpec::default())?;
        cfg.penalties[0] = Penalty {
            constraint: Constraint::AreaMax,
            target: geo.area,
            weight,
        };
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct IterInfo {
    pub h: f64,
    pub area: f64,
    pub volume: f64,
    pub min_radius: f64,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub info: IterInfo,
}

/// Something L-BFGS can minimize. `Ok(None)` marks an infeasible point (for
/// instance a shape whose mesh folds); the line search then backtracks.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<Option<Evaluation>>;
}

/// Penalized helicity as a function of the free surface coefficients.
pub struct HelicityObjective {
    pub base: FourierSurface,
    pub config: ShapeOptConfig,
    pub evaluations: usize,
}

impl HelicityObjective {
    pub fn new(base: FourierSurface, config: ShapeOptConfig) -> Self {
        HelicityObjective {
            base,
            config,
            evaluations: 0,
        }
    }

    pub fn initial_point(&self) -> Vec<f64> {
        let c = self.base.coefficients();
        self.config.free.iter().map(|&i| c[i]).collect()
    }

    pub fn surface_at(&self, x: &[f64]) -> Result<FourierSurface> {
        let mut c = self.base.coefficients();
        for (k, &i) in self.config.free.iter().enumerate() {
            c[i] = x[k];
        }
        self.base.with_coefficients(&c)
    }
}

impl Objective for HelicityObjective {
    fn evaluate(&mut self, x: &[f64]) -> Result<Option<Evaluation>> {
        self.evaluations += 1;
        let surface = match self.surface_at(x) {
            Ok(s) => s,
            Err(Error::InvalidSurface(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        let cfg = &self.config;
        let geo = match geometric_functionals(&surface, cfg.grid) {
            Ok(g) => g,
            Err(Error::DegenerateFrame { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let run = match run_helicity(&surface, cfg.resolution, cfg.solver) {
            Ok(r) => r,
            Err(Error::InvertedCell { .. }) => return Ok(None),
            Err(e) => return Err(e),
        };
        let h = run.report.h_l2;
        let gh = match cfg.gradient {
            GradientMethod::Boundary => helicity_coeff_gradient(&run, &surface)?,
            GradientMethod::Adjoint => discrete_helicity_gradient(&run, &surface)?,
        };
        let (a, v, r) = (geo.area, geo.volume, geo.soft_min_radius);
        let mut value = cfg.objective_sign * h;
        let mut grad: Vec<f64> = gh.iter().map(|g| cfg.objective_sign * g).collect();
        let active: Vec<&Penalty> = cfg
            .penalties
            .iter()
            .filter(|p| p.value(a, v, r) > 0.0)
            .collect();
        if !active.is_empty() {
            let gg = geometric_gradients(&surface, cfg.grid)?;
            for p in active {
                value += p.value(a, v, r);
                let slope = p.slope(a, v, r);
                let dg = match p.constraint {
                    Constraint::AreaMax => &gg.area,
                    Constraint::VolumeMax => &gg.volume,
                    Constraint::MinRadiusMin => &gg.soft_min_radius,
                };
                grad.iter_mut().zip(dg).for_each(|(g, d)| *g += slope * d);
            }
        }
        let gradient = cfg.free.iter().map(|&i| grad[i]).collect();
        Ok(Some(Evaluation {
            value,
            gradient,
            info: IterInfo {
                h,
                area: a,
                volume: v,
                min_radius: geo.min_radius,
            },
        }))
    }
}

#[derive(Clone, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    pub c1: f64,
    pub max_backtracks: usize,
    /// Length (max norm) of the first, steepest-descent trial step.
    pub initial_step: f64,
    pub gtol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iter: 100,
            c1: 1e-4,
            max_backtracks: 20,
            initial_step: 1e-2,
            gtol: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterRecord {
    pub iter: usize,
    #[serde(rename = "H")]
    pub h: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub area: f64,
    pub volume: f64,
    pub min_radius: f64,
    pub gnorm: f64,
    pub step: f64,
    #[serde(skip)]
    pub x: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptStatus {
    Converged,
    MaxIterations,
    LineSearchFailed,
}

#[derive(Clone, Debug)]
pub struct OptTrace {
    pub records: Vec<IterRecord>,
    pub status: OptStatus,
}

impl OptTrace {
    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("trace has the initial point")
    }
}

fn record(iter: usize, e: &Evaluation, x: &[f64], step: f64) -> IterRecord {
    IterRecord {
        iter,
        h: e.info.h,
        j: e.value,
        area: e.info.area,
        volume: e.info.volume,
        min_radius: e.info.min_radius,
        gnorm: e.gradient.iter().map(|g| g * g).sum::<f64>().sqrt(),
        step,
        x: x.to_vec(),
    }
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Limited-memory BFGS with Armijo backtracking (halving).
///
/// Accepted iterates never increase the objective. Infeasible trial points
/// are treated as failed Armijo tests.
pub fn lbfgs_optimize(
    obj: &mut impl Objective,
    x0: &[f64],
    opts: &LbfgsOptions,
) -> Result<OptTrace> {
    let mut x = x0.to_vec();
    let mut cur = obj
        .evaluate(&x)?
        .ok_or_else(|| Error::InvalidSurface("initial point is infeasible".into()))?;
    let mut records = vec![record(0, &cur, &x, 0.0)];
    let mut hist: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)> = Default::default();
    let mut status = OptStatus::MaxIterations;

    for iter in 1..=opts.max_iter {
        let g = &cur.gradient;
        if records.last().unwrap().gnorm <= opts.gtol {
            status = OptStatus::Converged;
            break;
        }
        // two-loop recursion
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(hist.len());
        for (s, y, rho) in hist.iter().rev() {
            let a = rho * dotv(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        let gamma = match hist.back() {
            Some((s, y, _)) => dotv(s, y) / dotv(y, y),
            None => opts.initial_step / g.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        };
        q.iter_mut().for_each(|qi| *qi *= gamma);
        for ((s, y, rho), a) in hist.iter().zip(alphas.iter().rev()) {
            let b = rho * dotv(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        let mut d: Vec<f64> = q.iter().map(|v| -v).collect();
        let mut slope = dotv(g, &d);
        if !(slope < 0.0) {
            hist.clear();
            let scale = opts.initial_step / g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            d = g.iter().map(|v| -scale * v).collect();
            slope = dotv(g, &d);
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + alpha * di).collect();
            if let Some(e) = obj.evaluate(&trial)? {
                if e.value <= cur.value + opts.c1 * alpha * slope {
                    accepted = Some((trial, e));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((xn, en)) = accepted else {
            status = OptStatus::LineSearchFailed;
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = en
            .gradient
            .iter()
            .zip(&cur.gradient)
            .map(|(a, b)| a - b)
            .collect();
        let sy = dotv(&s, &y);
        if sy > 1e-12 * dotv(&s, &s).sqrt() * dotv(&y, &y).sqrt() {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s.clone(), y, 1.0 / sy));
        }
        let step = dotv(&s, &s).sqrt();
        x = xn;
        cur = en;
        records.push(record(iter, &cur, &x, step));
    }
    if status == OptStatus::MaxIterations && records.last().unwrap().gnorm <= opts.gtol {
        status = OptStatus::Converged;
    }
    Ok(OptTrace { records, status })
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Quadratic {
        a: Vec<Vec<f64>>,
        b: Vec<f64>,
    }

    impl Objective for Quadratic {
        fn evaluate(&mut self, x: &[f64]) -> Result<Option<Evaluation>> {
            let ax: Vec<f64> = self.a.iter().map(|row| dotv(row, x)).collect();
            let value = 0.5 * dotv(x, &ax) - dotv(&self.b, x);
            let gradient = ax.iter().zip(&self.b).map(|(p, q)| p - q).collect();
            Ok(Some(Evaluation {
                value,
                gradient,
                info: IterInfo::default(),
            }))
        }
    }

    #[test]
    fn lbfgs_minimizes_quadratic() {
        let n: usize = 8;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| {
                        if i == j {
                            1.0 + i as f64
                        } else if i.abs_diff(j) == 1 {
                            0.3
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let b: Vec<f64> = (0..n).map(|i| (i as f64).cos()).collect();
        let mut q = Quadratic { a, b };
        let tr = lbfgs_optimize(
            &mut q,
            &vec![0.0; n],
            &LbfgsOptions {
                max_iter: 30,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(tr.status, OptStatus::Converged, "{:?}", tr.last());
        assert!(tr.last().gnorm <= 1e-8);
        assert!(tr.records.windows(2).all(|w| w[1].j <= w[0].j));
    }

    struct Walled;

    impl Objective for Walled {
        // (x - 2)² but infeasible beyond x = 1
        fn evaluate(&mut self, x: &[f64]) -> Result<Option<Evaluation>> {
            if x[0] > 1.0 {
                return Ok(None);
            }
            Ok(Some(Evaluation {
                value: (x[0] - 2.0).powi(2),
                gradient: vec![2.0 * (x[0] - 2.0)],
                info: IterInfo::default(),
            }))
        }
    }

    #[test]
    fn infeasible_trials_backtrack() {
        let opts = LbfgsOptions {
            max_iter: 10,
            initial_step: 5.0,
            ..Default::default()
        };
        let tr = lbfgs_optimize(&mut Walled, &[0.0], &opts).unwrap();
        assert!(tr.records.iter().all(|r| r.x[0] <= 1.0));
        assert!(tr.records.windows(2).all(|w| w[1].j <= w[0].j));
        assert!(tr.last().x[0] > 0.9);
    }

    #[test]
    fn penalty_is_a_cubic_hinge() {
        let p = Penalty {
            constraint: Constraint::VolumeMax,
            target: 1.0,
            weight: 2.0,
        };
        assert_eq!(p.value(0.0, 0.5, 0.0), 0.0);
        assert!((p.value(0.0, 1.5, 0.0) - 0.25).abs() < 1e-15);
        assert!((p.slope(0.0, 1.5, 0.0) - 1.5).abs() < 1e-15);
        let r = Penalty {
            constraint: Constraint::MinRadiusMin,
            target: 0.1,
            weight: 1.0,
        };
        assert_eq!(r.value(0.0, 0.0, 0.2), 0.0);
        assert!(r.slope(0.0, 0.0, 0.05) < 0.0);
    }
}
