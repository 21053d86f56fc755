//! Exact derivative of the discrete helicity `H_h = A2ᵀ M12 B_div` with
//! respect to the surface coefficients.
//!
//! Moving the mesh vertices by a velocity `θ` (affine on every cell) leaves
//! the degrees of freedom, the incidence matrices and `M12` unchanged, and
//! varies the other mass matrices through
//! `δM0 = ∫ div θ φ φ`, `δM1 = ∫ w (div θ - Dθ - Dθᵀ) w`,
//! `δM2 = ∫ v (Dθ + Dθᵀ - div θ) v`, `δM3 = -∫ div θ q q`.
//! One adjoint solve per system (A1, then B_div, then B_curl) turns the
//! derivative into a sum of such bilinear forms, which is accumulated once
//! into a 3×3 tensor and a scalar per cell. Each coefficient then costs one
//! pass over the cells.

use nalgebra::{Matrix3, Vector3};

use crate::error::Result;
use crate::feec::{oriented_local_edges, oriented_local_faces, TetGeom, TET_QUAD};
use crate::fields::{a1_system, b_curl_system, b_div_pinned_system, jump_pattern, HelicityRun};
use crate::geometry::FourierSurface;
use crate::linsolve::{dot, solve_saddle, SaddleMethod};
use crate::mesh::{generate_mesh, Resolution};

/// Per-cell weights of the mass-matrix sensitivities.
struct Sensitivity {
    tensor: Vec<Matrix3<f64>>,
    scalar: Vec<f64>,
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn sensitivity(run: &HelicityRun) -> Result<Sensitivity> {
    let (mesh, topo, c, tags) = (&run.mesh, &run.topo, &run.complex, &run.tags);
    let [n0, n1, _, n3] = c.counts;
    let b = &run.b_div.coeffs;
    let a = &run.a1.coeffs;
    let w = &run.w1.coeffs;
    let a2 = &run.a2.coeffs;
    let bc = &run.b_curl.coeffs;
    let u = &run.potential.base;

    let mut ell = vec![0.0; n1];
    for &(e, s) in &tags.gamma_prime {
        ell[e] = s;
    }
    let cb = dot(&ell, bc);
    let m12b = c.m12.mul_vec(b);

    // A1 adjoint
    let bc_m12_b = dot(bc, &m12b);
    let mut rhs: Vec<f64> = m12b
        .iter()
        .zip(&ell)
        .map(|(x, l)| x - l * bc_m12_b / cb)
        .collect();
    rhs.resize(n1 + c.counts[2], 0.0);
    let (lam2, _) = solve_saddle(&a1_system(c), &rhs, &SaddleMethod::Direct)?;
    let (lam_a, lam_w) = lam2.split_at(n1);

    // B_div adjoint, on interior faces with cell 0 pinned
    let inner = topo.interior_faces();
    let gb = sub(&c.m12.tr_mul_vec(a2), &c.m2.mul_vec(lam_w));
    let mut rhs: Vec<f64> = inner.iter().map(|&f| gb[f]).collect();
    rhs.resize(inner.len() + n3 - 1, 0.0);
    let (lam1, _) = solve_saddle(&b_div_pinned_system(c, &inner), &rhs, &SaddleMethod::Direct)?;
    let mut lam_b = vec![0.0; c.counts[2]];
    for (i, &f) in inner.iter().enumerate() {
        lam_b[f] = lam1[i];
    }

    // B_curl adjoint
    let circ_a = dot(&ell, a);
    let gc: Vec<f64> = m12b.iter().map(|x| -circ_a / cb * x).collect();
    let mut rhs = c.d0.tr_mul_vec(&gc);
    rhs.push(0.0);
    let sys_c = b_curl_system(c);
    let (lam0, _) = solve_saddle(&sys_c, &rhs, &SaddleMethod::Direct)?;
    let (lam_u, lam_mu) = (&lam0[..n0], lam0[n0]);
    // forward multiplier, recovered from the first block row
    let g = jump_pattern(mesh, topo, &run.cut);
    let r0: Vec<f64> =
        c.d0.tr_mul_vec(&c.m1.mul_vec(&g))
            .iter()
            .map(|x| -run.cut.jump * x)
            .collect();
    let mass = c.m0.mul_vec(&vec![1.0; n0]);
    let k = c.d0.transpose().matmul(&c.m1.matmul(&c.d0));
    let mu = dot(&mass, &sub(&r0, &k.mul_vec(u))) / dot(&mass, &mass);

    let d0_lam_u = c.d0.mul_vec(lam_u);
    let d1_lam_a = c.d1.mul_vec(lam_a);
    let d1a_minus_b = sub(&c.d1.mul_vec(a), b);
    let d2_lam_w = c.d2.mul_vec(lam_w);
    let d2_w = c.d2.mul_vec(w);

    let edge_pairs: [(f64, &[f64], &[f64]); 2] = [(-1.0, &d0_lam_u, bc), (-1.0, lam_a, a)];
    let face_pairs: [(f64, &[f64], &[f64]); 3] = [
        (1.0, &d1_lam_a, w),
        (1.0, lam_w, &d1a_minus_b),
        (-1.0, &lam_b, b),
    ];

    let mut tensor = Vec::with_capacity(n3);
    let mut scalar = Vec::with_capacity(n3);
    for t in 0..n3 {
        let tet = &mesh.tets[t];
        let geo = TetGeom::of(mesh, t);
        let le = oriented_local_edges(tet);
        let lf = oriented_local_faces(tet);
        let edge_field = |x: &[f64], bary: &[f64; 4]| -> Vector3<f64> {
            (0..6).fold(Vector3::zeros(), |acc, k| {
                acc + geo.edge_basis(le[k][0], le[k][1], bary) * x[topo.tet_edges[t][k]]
            })
        };
        let face_field = |x: &[f64], bary: &[f64; 4]| -> Vector3<f64> {
            (0..4).fold(Vector3::zeros(), |acc, k| {
                acc + geo.face_basis(lf[k][0], lf[k][1], lf[k][2], bary) * x[topo.tet_faces[t][k]]
            })
        };
        let mut gt = Matrix3::zeros();
        for bary in &TET_QUAD {
            for &(s, x, y) in &edge_pairs {
                gt += edge_field(x, bary) * edge_field(y, bary).transpose() * s;
            }
            for &(s, x, y) in &face_pairs {
                gt -= face_field(x, bary) * face_field(y, bary).transpose() * s;
            }
        }
        gt *= geo.vol / 4.0;
        let sum_lam_u: f64 = tet.iter().map(|&v| lam_u[v]).sum();
        let sum_u: f64 = tet.iter().map(|&v| u[v]).sum();
        let s =
            -d2_lam_w[t] * d2_w[t] / geo.vol - geo.vol / 4.0 * (mu * sum_lam_u + lam_mu * sum_u);
        tensor.push(gt);
        scalar.push(s);
    }
    Ok(Sensitivity { tensor, scalar })
}

/// Derivative of the mesh vertex positions with respect to one coefficient.
pub fn mesh_velocity(
    surface: &FourierSurface,
    res: Resolution,
    index: usize,
) -> Result<Vec<Vector3<f64>>> {
    let eps = 1e-6;
    let mut c = surface.coefficients();
    c[index] += eps;
    let plus = generate_mesh(&surface.with_coefficients(&c)?, res)?;
    c[index] -= 2.0 * eps;
    let minus = generate_mesh(&surface.with_coefficients(&c)?, res)?;
    Ok(plus
        .vertices
        .iter()
        .zip(&minus.vertices)
        .map(|(p, q)| (p - q) / (2.0 * eps))
        .collect())
}

/// `dH_h / dc_k` for every coefficient `k` of `surface`, which must be the
/// surface `run` was meshed from.
pub fn discrete_helicity_gradient(run: &HelicityRun, surface: &FourierSurface) -> Result<Vec<f64>> {
    let res = run.mesh.resolution.ok_or_else(|| {
        crate::error::Error::InvalidResolution("mesh was not generated from a surface".into())
    })?;
    let sens = sensitivity(run)?;
    (0..surface.n_coefficients())
        .map(|k| {
            let vel = mesh_velocity(surface, res, k)?;
            Ok(directional(run, &sens, &vel))
        })
        .collect()
}

fn directional(run: &HelicityRun, sens: &Sensitivity, velocity: &[Vector3<f64>]) -> f64 {
    let mesh = &run.mesh;
    let mut total = 0.0;
    for t in 0..mesh.n_tets() {
        let geo = TetGeom::of(mesh, t);
        let tet = &mesh.tets[t];
        let mut dtheta = Matrix3::zeros();
        for i in 0..4 {
            dtheta += velocity[tet[i]] * geo.grads[i].transpose();
        }
        let g = &sens.tensor[t];
        let div = dtheta.trace();
        total +=
            div * (g.trace() + sens.scalar[t]) - dtheta.component_mul(&(g + g.transpose())).sum();
    }
    total
}

/// Derivative along an arbitrary vertex velocity, e.g. for checks against
/// finite differences of a mesh deformation.
pub fn discrete_helicity_derivative(run: &HelicityRun, velocity: &[Vector3<f64>]) -> Result<f64> {
    let sens = sensitivity(run)?;
    Ok(directional(run, &sens, velocity))
}
