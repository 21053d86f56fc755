//! Fourier description of toroidal boundary surfaces.
//!
//! A surface is given in cylindrical coordinates by
//! `R(u, v) = Σ r_mn cos 2π(m u + n N v)` and `Z(u, v) = Σ z_mn sin 2π(m u + n N v)`
//! with toroidal angle `φ = 2π v`, so `v ∈ [0, 1)` covers the whole torus and
//! `N = n_fp` is the number of field periods.

use std::f64::consts::PI;
use std::path::Path;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stellarator-symmetric Fourier surface.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourierSurface {
    pub n_fp: u32,
    pub modes: Vec<(u32, i32)>,
    pub r_cos: Vec<f64>,
    pub z_sin: Vec<f64>,
}

/// Which of the two coefficient families a perturbation acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CoeffKind {
    R,
    Z,
}

/// A single coefficient `r_mn` or `z_mn`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModePerturbation {
    pub kind: CoeffKind,
    pub m: u32,
    pub n: i32,
}

/// Position and derivatives of the parametrization up to second order.
#[derive(Clone, Copy, Debug)]
pub struct SurfacePoint {
    pub x: Point3<f64>,
    pub xu: Vector3<f64>,
    pub xv: Vector3<f64>,
    pub xuu: Vector3<f64>,
    pub xuv: Vector3<f64>,
    pub xvv: Vector3<f64>,
}

/// Local frame at a surface point; `normal` is the outward unit normal.
#[derive(Clone, Copy, Debug)]
pub struct SurfaceFrame {
    pub x: Point3<f64>,
    pub tangent_u: Vector3<f64>,
    pub tangent_v: Vector3<f64>,
    pub normal: Vector3<f64>,
    /// `|x_u × x_v|`, the area element in parameter space.
    pub jacobian: f64,
}

/// Sampling grid on the `(u, v)` square.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_u: usize,
    pub n_v: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n_u: 64, n_v: 128 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeoReport {
    pub area: f64,
    pub volume: f64,
    pub min_radius: f64,
    pub soft_min_radius: f64,
    /// Principal curvatures at the grid nodes, `v`-major.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub curvatures: Vec<[f64; 2]>,
}

/// Gradients of the geometric functionals with respect to every stored
/// coefficient, laid out like [`FourierSurface::coefficients`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GeoGradients {
    pub area: Vec<f64>,
    pub volume: Vec<f64>,
    pub soft_min_radius: Vec<f64>,
}

/// Exponent of the p-norm used to smooth the maximum curvature.
pub const SOFT_MIN_EXPONENT: f64 = 16.0;

/// Anything that maps the `(u, v)` square onto a closed toroidal surface.
pub trait BoundaryMap {
    fn point(&self, u: f64, v: f64) -> Point3<f64>;
}

impl FourierSurface {
    pub fn new(
        n_fp: u32,
        modes: Vec<(u32, i32)>,
        r_cos: Vec<f64>,
        z_sin: Vec<f64>,
    ) -> Result<Self> {
        let s = FourierSurface {
            n_fp,
            modes,
            r_cos,
            z_sin,
        };
        s.validate()?;
        Ok(s)
    }

    /// Axisymmetric torus with circular cross-section.
    pub fn circular_torus(major: f64, minor: f64) -> Self {
        FourierSurface {
            n_fp: 1,
            modes: vec![(0, 0), (1, 0)],
            r_cos: vec![major, minor],
            z_sin: vec![0.0, minor],
        }
    }

    /// Three-period rotating ellipse on a helical axis. Used as the default
    /// non-axisymmetric test case.
    pub fn twisted_demo() -> Self {
        FourierSurface {
            n_fp: 3,
            modes: vec![(0, 0), (1, 0), (0, 1), (1, 1)],
            r_cos: vec![1.0, 0.15, 0.06, 0.05],
            z_sin: vec![0.0, 0.15, 0.06, -0.05],
        }
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let surf: FourierSurface = serde_json::from_str(s)?;
        surf.validate()?;
        Ok(surf)
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("surface serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSurface(msg));
        if self.n_fp == 0 {
            return bad("n_fp must be at least 1".into());
        }
        if self.r_cos.len() != self.modes.len() || self.z_sin.len() != self.modes.len() {
            return bad(format!(
                "{} modes but {} r_cos and {} z_sin coefficients",
                self.modes.len(),
                self.r_cos.len(),
                self.z_sin.len()
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for &(m, n) in &self.modes {
            if m == 0 && n < 0 {
                return bad(format!("mode (0, {n}) duplicates (0, {})", -n));
            }
            if !seen.insert((m, n)) {
                return bad(format!("duplicate mode ({m}, {n})"));
            }
        }
        if self.r_cos.iter().chain(&self.z_sin).any(|c| !c.is_finite()) {
            return bad("non-finite coefficient".into());
        }
        match self.mode_index(0, 0) {
            Some(i) if self.r_cos[i] > 0.0 => Ok(()),
            _ => bad("r_cos(0, 0) must be present and positive".into()),
        }
    }

    pub fn mode_index(&self, m: u32, n: i32) -> Option<usize> {
        self.modes.iter().position(|&mn| mn == (m, n))
    }

    pub fn n_coefficients(&self) -> usize {
        2 * self.modes.len()
    }

    /// Flat coefficient vector `[r_cos..., z_sin...]`.
    pub fn coefficients(&self) -> Vec<f64> {
        self.r_cos.iter().chain(&self.z_sin).copied().collect()
    }

    pub fn with_coefficients(&self, c: &[f64]) -> Result<Self> {
        let k = self.modes.len();
        if c.len() != 2 * k {
            return Err(Error::DimensionMismatch {
                expected: 2 * k,
                got: c.len(),
            });
        }
        let s = FourierSurface {
            n_fp: self.n_fp,
            modes: self.modes.clone(),
            r_cos: c[..k].to_vec(),
            z_sin: c[k..].to_vec(),
        };
        s.validate()?;
        Ok(s)
    }

    /// Position of a perturbation in the flat coefficient vector.
    pub fn coefficient_index(&self, p: ModePerturbation) -> Result<usize> {
        let i = self
            .mode_index(p.m, p.n)
            .ok_or(Error::AbsentMode { m: p.m, n: p.n })?;
        Ok(match p.kind {
            CoeffKind::R => i,
            CoeffKind::Z => self.modes.len() + i,
        })
    }

    pub fn perturbation_at(&self, index: usize) -> ModePerturbation {
        let k = self.modes.len();
        let (kind, i) = if index < k {
            (CoeffKind::R, index)
        } else {
            (CoeffKind::Z, index - k)
        };
        let (m, n) = self.modes[i];
        ModePerturbation { kind, m, n }
    }

    /// Surface scaled by `lambda` about the origin.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut s = self.clone();
        s.r_cos.iter_mut().for_each(|c| *c *= lambda);
        s.z_sin.iter_mut().for_each(|c| *c *= lambda);
        s
    }

    /// Mirror image under `z -> -z`.
    pub fn reflected(&self) -> Self {
        let mut s = self.clone();
        s.z_sin.iter_mut().for_each(|c| *c = -*c);
        s
    }

    fn angle_rates(&self, m: u32, n: i32) -> (f64, f64) {
        (
            2.0 * PI * m as f64,
            2.0 * PI * (n as f64) * self.n_fp as f64,
        )
    }

    /// Cylindrical `(R, Z)` at a parameter point.
    pub fn rz(&self, u: f64, v: f64) -> (f64, f64) {
        let (mut r, mut z) = (0.0, 0.0);
        for (k, &(m, n)) in self.modes.iter().enumerate() {
            let (au, av) = self.angle_rates(m, n);
            let (s, c) = (au * u + av * v).sin_cos();
            r += self.r_cos[k] * c;
            z += self.z_sin[k] * s;
        }
        (r, z)
    }

    pub fn eval(&self, u: f64, v: f64) -> Point3<f64> {
        let (r, z) = self.rz(u, v);
        let (sp, cp) = (2.0 * PI * v).sin_cos();
        Point3::new(r * cp, r * sp, z)
    }

    pub fn eval_derivatives(&self, u: f64, v: f64) -> SurfacePoint {
        // cylindrical components and their derivatives
        let mut r = [0.0; 6]; // R, R_u, R_v, R_uu, R_uv, R_vv
        let mut z = [0.0; 6];
        for (k, &(m, n)) in self.modes.iter().enumerate() {
            let (au, av) = self.angle_rates(m, n);
            let (s, c) = (au * u + av * v).sin_cos();
            let (rc, zs) = (self.r_cos[k], self.z_sin[k]);
            r[0] += rc * c;
            r[1] -= rc * au * s;
            r[2] -= rc * av * s;
            r[3] -= rc * au * au * c;
            r[4] -= rc * au * av * c;
            r[5] -= rc * av * av * c;
            z[0] += zs * s;
            z[1] += zs * au * c;
            z[2] += zs * av * c;
            z[3] -= zs * au * au * s;
            z[4] -= zs * au * av * s;
            z[5] -= zs * av * av * s;
        }
        let w = 2.0 * PI;
        let (sp, cp) = (w * v).sin_cos();
        SurfacePoint {
            x: Point3::new(r[0] * cp, r[0] * sp, z[0]),
            xu: Vector3::new(r[1] * cp, r[1] * sp, z[1]),
            xv: Vector3::new(r[2] * cp - w * r[0] * sp, r[2] * sp + w * r[0] * cp, z[2]),
            xuu: Vector3::new(r[3] * cp, r[3] * sp, z[3]),
            xuv: Vector3::new(r[4] * cp - w * r[1] * sp, r[4] * sp + w * r[1] * cp, z[4]),
            xvv: Vector3::new(
                r[5] * cp - 2.0 * w * r[2] * sp - w * w * r[0] * cp,
                r[5] * sp + 2.0 * w * r[2] * cp - w * w * r[0] * sp,
                z[5],
            ),
        }
    }

    /// `+1` if `x_u × x_v` already points outward, `-1` otherwise.
    ///
    /// The parametrization is regular, so the sign is global. It is fixed by
    /// the orientation of the `v = 0` cross-section in the `(R, Z)` half-plane:
    /// a counter-clockwise section makes `x_u × x_v` point inward.
    pub fn normal_sign(&self) -> f64 {
        let n = 128;
        let mut area = 0.0;
        for j in 0..n {
            let (r0, z0) = self.rz(j as f64 / n as f64, 0.0);
            let (r1, z1) = self.rz((j + 1) as f64 / n as f64, 0.0);
            area += r0 * z1 - r1 * z0;
        }
        if area > 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    /// Outward frame; the sign is computed on the fly, see [`Self::frame_with_sign`]
    /// when evaluating many points.
    pub fn frame(&self, u: f64, v: f64) -> Result<SurfaceFrame> {
        self.frame_with_sign(u, v, self.normal_sign())
    }

    pub fn frame_with_sign(&self, u: f64, v: f64, sign: f64) -> Result<SurfaceFrame> {
        let p = self.eval_derivatives(u, v);
        frame_from_point(&p, sign).ok_or(Error::DegenerateFrame { u, v })
    }

    /// Displacement field generated by a unit change of one coefficient.
    pub fn basis_displacement(&self, p: ModePerturbation, u: f64, v: f64) -> Vector3<f64> {
        let (au, av) = self.angle_rates(p.m, p.n);
        let (s, c) = (au * u + av * v).sin_cos();
        match p.kind {
            CoeffKind::R => {
                let (sp, cp) = (2.0 * PI * v).sin_cos();
                Vector3::new(c * cp, c * sp, 0.0)
            }
            CoeffKind::Z => Vector3::new(0.0, 0.0, s),
        }
    }
}

impl BoundaryMap for FourierSurface {
    fn point(&self, u: f64, v: f64) -> Point3<f64> {
        self.eval(u, v)
    }
}

fn frame_from_point(p: &SurfacePoint, sign: f64) -> Option<SurfaceFrame> {
    let cross = p.xu.cross(&p.xv);
    let jac = cross.norm();
    let scale = p.xu.norm() * p.xv.norm();
    if !(jac > 1e-12 * scale) {
        return None;
    }
    Some(SurfaceFrame {
        x: p.x,
        tangent_u: p.xu,
        tangent_v: p.xv,
        normal: cross * (sign / jac),
        jacobian: jac,
    })
}

/// Principal curvatures from the two fundamental forms.
pub fn principal_curvatures(p: &SurfacePoint) -> Option<[f64; 2]> {
    let cross = p.xu.cross(&p.xv);
    let jac = cross.norm();
    if !(jac > 0.0) {
        return None;
    }
    let n = cross / jac;
    let (e, f, g) = (p.xu.dot(&p.xu), p.xu.dot(&p.xv), p.xv.dot(&p.xv));
    let (l, m, nn) = (p.xuu.dot(&n), p.xuv.dot(&n), p.xvv.dot(&n));
    let det = e * g - f * f;
    let gauss = (l * nn - m * m) / det;
    let mean = (e * nn - 2.0 * f * m + g * l) / (2.0 * det);
    let disc = (mean * mean - gauss).max(0.0).sqrt();
    Some([mean + disc, mean - disc])
}

/// Area, enclosed volume and curvature radii of the surface.
///
/// Area and volume use the midpoint rule on `grid`, which is spectrally
/// accurate for these periodic integrands. Curvatures are sampled at the grid
/// nodes.
pub fn geometric_functionals(surface: &FourierSurface, grid: GridSpec) -> Result<GeoReport> {
    let mut rep = functionals_inner(surface, grid, surface.normal_sign())?;
    rep.curvatures = curvature_samples(surface, grid)?;
    Ok(rep)
}

fn functionals_inner(surface: &FourierSurface, grid: GridSpec, sign: f64) -> Result<GeoReport> {
    if grid.n_u < 3 || grid.n_v < 3 {
        return Err(Error::InvalidResolution(format!(
            "grid {}x{} too coarse",
            grid.n_u, grid.n_v
        )));
    }
    let (du, dv) = (1.0 / grid.n_u as f64, 1.0 / grid.n_v as f64);
    let (mut area, mut vol3) = (0.0, 0.0);
    for k in 0..grid.n_v {
        for j in 0..grid.n_u {
            let (u, v) = ((j as f64 + 0.5) * du, (k as f64 + 0.5) * dv);
            let fr = surface.frame_with_sign(u, v, sign)?;
            area += fr.jacobian;
            vol3 += fr.x.coords.dot(&fr.normal) * fr.jacobian;
        }
    }
    let (mut kmax, mut kp) = (0.0f64, 0.0);
    for k in 0..grid.n_v {
        for j in 0..grid.n_u {
            let (u, v) = (j as f64 * du, k as f64 * dv);
            let p = surface.eval_derivatives(u, v);
            let [k1, k2] = principal_curvatures(&p).ok_or(Error::DegenerateFrame { u, v })?;
            let kk = k1.abs().max(k2.abs());
            kmax = kmax.max(kk);
            kp += kk.powf(SOFT_MIN_EXPONENT);
        }
    }
    let kp = (kp / (grid.n_u * grid.n_v) as f64).powf(1.0 / SOFT_MIN_EXPONENT);
    Ok(GeoReport {
        area: area * du * dv,
        volume: vol3 * du * dv / 3.0,
        min_radius: 1.0 / kmax,
        soft_min_radius: 1.0 / kp,
        curvatures: Vec::new(),
    })
}

fn curvature_samples(surface: &FourierSurface, grid: GridSpec) -> Result<Vec<[f64; 2]>> {
    let mut out = Vec::with_capacity(grid.n_u * grid.n_v);
    for k in 0..grid.n_v {
        for j in 0..grid.n_u {
            let (u, v) = (j as f64 / grid.n_u as f64, k as f64 / grid.n_v as f64);
            let p = surface.eval_derivatives(u, v);
            out.push(principal_curvatures(&p).ok_or(Error::DegenerateFrame { u, v })?);
        }
    }
    Ok(out)
}

/// Central-difference step for a coefficient of magnitude `c`.
pub fn fd_step(c: f64) -> f64 {
    1e-6 * c.abs().max(1.0)
}

/// `[area, volume, soft_min_radius]` derivatives with respect to one coefficient.
pub fn geometric_gradient(
    surface: &FourierSurface,
    grid: GridSpec,
    p: ModePerturbation,
) -> Result<[f64; 3]> {
    let idx = surface.coefficient_index(p)?;
    gradient_entry(surface, grid, idx, surface.normal_sign())
}

fn gradient_entry(
    surface: &FourierSurface,
    grid: GridSpec,
    idx: usize,
    sign: f64,
) -> Result<[f64; 3]> {
    let c = surface.coefficients();
    let h = fd_step(c[idx]);
    let mut plus = c.clone();
    plus[idx] += h;
    let mut minus = c;
    minus[idx] -= h;
    let eval = |coeffs: &[f64]| -> Result<GeoReport> {
        let s = FourierSurface {
            n_fp: surface.n_fp,
            modes: surface.modes.clone(),
            r_cos: coeffs[..surface.modes.len()].to_vec(),
            z_sin: coeffs[surface.modes.len()..].to_vec(),
        };
        functionals_inner(&s, grid, sign)
    };
    let (a, b) = (eval(&plus)?, eval(&minus)?);
    let d = 2.0 * h;
    Ok([
        (a.area - b.area) / d,
        (a.volume - b.volume) / d,
        (a.soft_min_radius - b.soft_min_radius) / d,
    ])
}

pub fn geometric_gradients(surface: &FourierSurface, grid: GridSpec) -> Result<GeoGradients> {
    let sign = surface.normal_sign();
    let mut g = GeoGradients {
        area: vec![],
        volume: vec![],
        soft_min_radius: vec![],
    };
    for idx in 0..surface.n_coefficients() {
        let [a, v, r] = gradient_entry(surface, grid, idx, sign)?;
        g.area.push(a);
        g.volume.push(v);
        g.soft_min_radius.push(r);
    }
    Ok(g)
}
