//! Harmonic field, vector potentials and helicity.
//!
//! The harmonic field is computed twice: as the gradient of a multivalued
//! potential (`B_curl`, in the edge space) and from a mixed formulation that
//! makes it exactly divergence free (`B_div`, in the face space). Both are
//! normalized so that their circulation along the toroidal loop is `2π`.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::feec::{
    assemble_complex, oriented_local_edges, DeRhamComplex, FEField, TetGeom, TET_QUAD,
};
use crate::geometry::BoundaryMap;
use crate::linsolve::{
    norm_inf, solve_saddle, BlockSystem, CsrMatrix, MinresOptions, SaddleMethod, SolveReport,
    SolverChoice,
};
use crate::mesh::{
    cut_scalar_space, generate_mesh, tag_cut, CutMesh, Resolution, Topology, TopologyTags, TorMesh,
};

/// Multivalued scalar potential: values on the original vertices and on the
/// copies of the cut.
#[derive(Clone, Debug)]
pub struct CutPotential {
    pub base: Vec<f64>,
    pub copies: Vec<f64>,
}

/// `ψ(b) - ψ(a)` on every edge `[a, b]`, where `ψ` is 1 on cut copies.
pub(crate) fn jump_pattern(mesh: &TorMesh, topo: &Topology, cut: &CutMesh) -> Vec<f64> {
    let mut g = vec![0.0; topo.n_edges()];
    for (t, ct) in cut.tets.iter().enumerate() {
        let tet = &mesh.tets[t];
        for (k, [la, lb]) in oriented_local_edges(tet).into_iter().enumerate() {
            let psi = |l: usize| if cut.is_copy(ct[l]) { 1.0 } else { 0.0 };
            let d = psi(lb) - psi(la);
            if d != 0.0 {
                g[topo.tet_edges[t][k]] = d;
            }
        }
    }
    g
}

fn column(v: &[f64]) -> CsrMatrix {
    let t: Vec<(usize, usize, f64)> = v.iter().enumerate().map(|(i, &x)| (i, 0, x)).collect();
    CsrMatrix::from_triplets(v.len(), 1, &t)
}

/// `[D0ᵀ M1 D0, M0 1; (M0 1)ᵀ, 0]`: the potential of `B_curl` with a
/// zero-mean constraint.
pub(crate) fn b_curl_system(complex: &DeRhamComplex) -> BlockSystem {
    let n0 = complex.counts[0];
    let k = complex
        .d0
        .transpose()
        .matmul(&complex.m1.matmul(&complex.d0));
    let mass = complex.m0.mul_vec(&vec![1.0; n0]);
    BlockSystem::new(vec![n0, 1])
        .diagonal(0, k)
        .coupling(0, 1, column(&mass))
        .inertia(vec![1, -1])
}

/// `[M2, D2ᵀ; D2, 0]` on interior faces, without the equation and the
/// unknown of cell 0.
pub(crate) fn b_div_pinned_system(complex: &DeRhamComplex, inner: &[usize]) -> BlockSystem {
    let n3 = complex.counts[3];
    let all_tets: Vec<usize> = (0..n3).collect();
    BlockSystem::new(vec![inner.len(), n3 - 1])
        .diagonal(0, complex.m2.select(inner, inner))
        .coupling(1, 0, complex.d2.select(&all_tets[1..], inner))
        .inertia(vec![1, -1])
}

/// `[M1, -D1ᵀ M2; -M2 D1, -D2ᵀ M3 D2]`, the system for `A1`.
pub(crate) fn a1_system(complex: &DeRhamComplex) -> BlockSystem {
    let [_, n1, n2, _] = complex.counts;
    let m2d1 = complex.m2.matmul(&complex.d1);
    let d2tm3d2 = complex
        .d2
        .transpose()
        .matmul(&complex.m3.matmul(&complex.d2));
    let shift = complex
        .m2
        .scaled(-1e-5 * d2tm3d2.trace() / complex.m2.trace());
    BlockSystem::new(vec![n1, n2])
        .diagonal(0, complex.m1.clone())
        .coupling(1, 0, m2d1.scaled(-1.0))
        .diagonal(1, d2tm3d2.scaled(-1.0))
        .shift(1, shift)
        .inertia(vec![1, -1])
}

/// Harmonic field as the gradient of a P1 potential with jump `2π` across `Σ`.
///
/// The potential is fixed by a zero-mean constraint; the field is
/// `D0 u + 2π g` with `g` the edge pattern of the jump.
pub fn solve_b_curl(
    mesh: &TorMesh,
    topo: &Topology,
    cut: &CutMesh,
    complex: &DeRhamComplex,
) -> Result<(CutPotential, FEField, SolveReport)> {
    let n0 = complex.counts[0];
    let g = jump_pattern(mesh, topo, cut);
    let m1g = complex.m1.mul_vec(&g);
    let rhs_u: Vec<f64> = complex
        .d0
        .tr_mul_vec(&m1g)
        .iter()
        .map(|x| -cut.jump * x)
        .collect();
    let sys = b_curl_system(complex);
    let mut rhs = rhs_u;
    rhs.push(0.0);
    let (x, rep) = solve_saddle(&sys, &rhs, &SaddleMethod::Direct)?;
    let u = x[..n0].to_vec();
    let du = complex.d0.mul_vec(&u);
    let b: Vec<f64> = du.iter().zip(&g).map(|(d, gi)| d + cut.jump * gi).collect();
    let copies = cut.duplicates.iter().map(|&v| u[v] + cut.jump).collect();
    Ok((CutPotential { base: u, copies }, FEField::new(1, b), rep))
}

/// Divergence-free harmonic field in the face space with zero normal flux on
/// the boundary.
///
/// Solves, for `B` on interior faces and `ũ` (cell values of the potential),
/// `M2 B + D2ᵀ ũ = 2π s`, `D2 B + vol p = 0`, `volᵀ ũ = 0`, where `s` marks the
/// faces of `Σ`. Returns `B` and the level-3 potential `u = vol ũ`.
pub fn solve_b_div(
    topo: &Topology,
    complex: &DeRhamComplex,
    tags: &TopologyTags,
    choice: SolverChoice,
) -> Result<(FEField, FEField, SolveReport)> {
    let [_, _, n2, n3] = complex.counts;
    let inner = topo.interior_faces();
    let all_tets: Vec<usize> = (0..n3).collect();
    let m2 = complex.m2.select(&inner, &inner);
    let d2 = complex.d2.select(&all_tets, &inner);
    let vol = &complex.volumes;
    let s = tags.sigma_indicator(n2);

    let mut rhs: Vec<f64> = inner.iter().map(|&f| 2.0 * PI * s[f]).collect();
    let (x, rep) = match choice {
        SolverChoice::Direct => {
            // The rows of D2 restricted to interior faces sum to zero, so one
            // cell equation is redundant: pin that cell's potential instead of
            // carrying the dense mean-value row into the factorization.
            let sys = b_div_pinned_system(complex, &inner);
            rhs.resize(inner.len() + n3 - 1, 0.0);
            let (mut x, rep) = solve_saddle(&sys, &rhs, &SaddleMethod::Direct)?;
            x.insert(inner.len(), 0.0);
            let mean =
                (0..n3).map(|t| vol[t] * x[inner.len() + t]).sum::<f64>() / vol.iter().sum::<f64>();
            x[inner.len()..].iter_mut().for_each(|v| *v -= mean);
            (x, rep)
        }
        SolverChoice::Minres => {
            let sys = BlockSystem::new(vec![inner.len(), n3, 1])
                .diagonal(0, m2.clone())
                .coupling(1, 0, d2.clone())
                .coupling(1, 2, column(vol));
            rhs.resize(inner.len() + n3 + 1, 0.0);
            let m3 = complex.m3.select(&all_tets, &all_tets);
            let graddiv = d2.transpose().matmul(&m3.matmul(&d2));
            let omega: f64 = vol.iter().sum();
            let method = SaddleMethod::Minres {
                preconditioner: vec![
                    m2.add_scaled(&graddiv, 1.0),
                    CsrMatrix::diagonal(vol),
                    CsrMatrix::diagonal(&[omega]),
                ],
                options: MinresOptions::default(),
            };
            solve_saddle(&sys, &rhs, &method)?
        }
    };
    let mut b = vec![0.0; n2];
    for (i, &f) in inner.iter().enumerate() {
        b[f] = x[i];
    }
    let u: Vec<f64> = (0..n3).map(|t| vol[t] * x[inner.len() + t]).collect();
    Ok((FEField::new(2, b), FEField::new(3, u), rep))
}

/// Vector potential with `curl A1 = B` and `A1` orthogonal to gradients in the
/// weak sense, through the mixed system
/// `M1 a - D1ᵀ M2 w = 0`, `-M2 D1 a - D2ᵀ M3 D2 w = -M2 b`.
///
/// Returns `A1` and the auxiliary face field `w`.
pub fn solve_a1(
    complex: &DeRhamComplex,
    b: &FEField,
    choice: SolverChoice,
) -> Result<(FEField, FEField, SolveReport)> {
    b.expect_level(2)?;
    let [_, n1, _, _] = complex.counts;
    let sys = a1_system(complex);
    let mut rhs = vec![0.0; n1];
    rhs.extend(complex.m2.mul_vec(&b.coeffs).iter().map(|x| -x));
    let method = match choice {
        SolverChoice::Direct => SaddleMethod::Direct,
        SolverChoice::Minres => {
            let m2d1 = complex.m2.matmul(&complex.d1);
            let d2tm3d2 = complex
                .d2
                .transpose()
                .matmul(&complex.m3.matmul(&complex.d2));
            let curlcurl = complex.d1.transpose().matmul(&m2d1);
            SaddleMethod::Minres {
                preconditioner: vec![
                    complex.m1.add_scaled(&curlcurl, 1.0),
                    complex.m2.add_scaled(&d2tm3d2, 1.0),
                ],
                options: MinresOptions::default(),
            }
        }
    };
    let (x, rep) = solve_saddle(&sys, &rhs, &method)?;
    Ok((
        FEField::new(1, x[..n1].to_vec()),
        FEField::new(2, x[n1..].to_vec()),
        rep,
    ))
}

/// Circulation of an edge field along `γ'`.
pub fn toroidal_circulation(field: &FEField, tags: &TopologyTags) -> Result<f64> {
    field.expect_level(1)?;
    Ok(tags
        .gamma_prime
        .iter()
        .map(|&(e, s)| s * field.coeffs[e])
        .sum())
}

/// Circulation of `A1` around the poloidal loop, `(1/2π) ∫ curl A1 · B_curl`.
pub fn poloidal_circulation(
    complex: &DeRhamComplex,
    a1: &FEField,
    b_curl: &FEField,
) -> Result<f64> {
    a1.expect_level(1)?;
    b_curl.expect_level(1)?;
    let curl = complex.d1.mul_vec(&a1.coeffs);
    Ok(complex.m12.bilinear(&b_curl.coeffs, &curl) / (2.0 * PI))
}

/// `A2 = A1 - (circ_γ'(A1) / 2π) B_curl`, the potential with zero toroidal circulation.
pub fn make_a2(a1: &FEField, b_curl: &FEField, tags: &TopologyTags) -> Result<FEField> {
    let c = toroidal_circulation(a1, tags)?;
    let cb = toroidal_circulation(b_curl, tags)?;
    let f = c / cb;
    Ok(FEField::new(
        1,
        a1.coeffs
            .iter()
            .zip(&b_curl.coeffs)
            .map(|(a, b)| a - f * b)
            .collect(),
    ))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HelicityReport {
    pub resolution: Option<Resolution>,
    pub n_tets: usize,
    pub h_max: f64,
    /// `∫ A2 · B_div`.
    pub h_l2: f64,
    /// `-circ_γ'(A1) · circ_γ(A1)`.
    pub h_circ: f64,
    pub circ_toroidal_a1: f64,
    pub circ_poloidal_a1: f64,
    pub circ_toroidal_b_curl: f64,
    pub circ_toroidal_a2: f64,
    pub b_curl_energy: f64,
    pub b_div_energy: f64,
    /// `‖D2 B_div‖∞`.
    pub div_residual: f64,
    /// `‖D1 A1 - B_div‖∞`.
    pub curl_residual: f64,
    pub solves: Vec<SolveReport>,
}

/// Everything computed for one domain.
pub struct HelicityRun {
    pub mesh: TorMesh,
    pub topo: Topology,
    pub tags: TopologyTags,
    pub cut: CutMesh,
    pub complex: DeRhamComplex,
    pub potential: CutPotential,
    pub b_curl: FEField,
    pub b_div: FEField,
    pub u_div: FEField,
    pub a1: FEField,
    pub w1: FEField,
    pub a2: FEField,
    pub report: HelicityReport,
}

pub fn run_helicity(
    map: &impl BoundaryMap,
    res: Resolution,
    choice: SolverChoice,
) -> Result<HelicityRun> {
    run_on_mesh(generate_mesh(map, res)?, choice)
}

pub fn run_on_mesh(mesh: TorMesh, choice: SolverChoice) -> Result<HelicityRun> {
    let topo = Topology::build(&mesh)?;
    let tags = tag_cut(&mesh, &topo)?;
    let cut = cut_scalar_space(&mesh, &tags)?;
    let complex = assemble_complex(&mesh, &topo)?;
    let (potential, b_curl, r0) = solve_b_curl(&mesh, &topo, &cut, &complex)?;
    let (b_div, u_div, r1) = solve_b_div(&topo, &complex, &tags, choice)?;
    let (a1, w1, r2) = solve_a1(&complex, &b_div, choice)?;
    let a2 = make_a2(&a1, &b_curl, &tags)?;

    let h_l2 = complex.m12.bilinear(&a2.coeffs, &b_div.coeffs);
    let circ_tor = toroidal_circulation(&a1, &tags)?;
    let circ_pol = poloidal_circulation(&complex, &a1, &b_curl)?;
    let curl_a1 = complex.d1.mul_vec(&a1.coeffs);
    let curl_residual = norm_inf(
        &curl_a1
            .iter()
            .zip(&b_div.coeffs)
            .map(|(x, y)| x - y)
            .collect::<Vec<_>>(),
    );
    let report = HelicityReport {
        resolution: mesh.resolution,
        n_tets: mesh.n_tets(),
        h_max: mesh.max_edge_length(),
        h_l2,
        h_circ: -circ_tor * circ_pol,
        circ_toroidal_a1: circ_tor,
        circ_poloidal_a1: circ_pol,
        circ_toroidal_b_curl: toroidal_circulation(&b_curl, &tags)?,
        circ_toroidal_a2: toroidal_circulation(&a2, &tags)?,
        b_curl_energy: complex.m1.bilinear(&b_curl.coeffs, &b_curl.coeffs),
        b_div_energy: complex.m2.bilinear(&b_div.coeffs, &b_div.coeffs),
        div_residual: norm_inf(&complex.d2.mul_vec(&b_div.coeffs)),
        curl_residual,
        solves: vec![r0, r1, r2],
    };
    Ok(HelicityRun {
        mesh,
        topo,
        tags,
        cut,
        complex,
        potential,
        b_curl,
        b_div,
        u_div,
        a1,
        w1,
        a2,
        report,
    })
}

/// `(‖B_h - B‖, ‖B‖)` in `L²(Ω_h)` for an edge or face field, with the
/// 4-point rule on every tetrahedron.
pub fn l2_error(
    mesh: &TorMesh,
    topo: &Topology,
    field: &FEField,
    exact: impl Fn(&Point3<f64>) -> Vector3<f64>,
) -> Result<(f64, f64)> {
    let (mut err, mut norm) = (0.0, 0.0);
    for t in 0..mesh.n_tets() {
        let g = TetGeom::of(mesh, t);
        for bary in TET_QUAD {
            let bh = crate::feec::eval_field(mesh, topo, field, t, &bary)?.vector();
            let b = exact(&g.point(&bary));
            err += g.vol / 4.0 * (bh - b).norm_squared();
            norm += g.vol / 4.0 * b.norm_squared();
        }
    }
    Ok((err.sqrt(), norm.sqrt()))
}

/// `e_φ / R`, the harmonic field of any axisymmetric solid torus.
pub fn axisymmetric_field(p: &Point3<f64>) -> Vector3<f64> {
    let r2 = p.x * p.x + p.y * p.y;
    Vector3::new(-p.y / r2, p.x / r2, 0.0)
}

/// Only the harmonic-field part of the pipeline, for convergence studies.
pub fn harmonic_curl_only(
    map: &impl BoundaryMap,
    res: Resolution,
) -> Result<(TorMesh, Topology, DeRhamComplex, FEField)> {
    let mesh = generate_mesh(map, res)?;
    let topo = Topology::build(&mesh)?;
    let tags = tag_cut(&mesh, &topo)?;
    let cut = cut_scalar_space(&mesh, &tags)?;
    let complex = assemble_complex(&mesh, &topo)?;
    let (_, b, _) = solve_b_curl(&mesh, &topo, &cut, &complex)?;
    Ok((mesh, topo, complex, b))
}
