//! Lowest-order discrete de Rham complex on a tetrahedral mesh:
//! P1 Lagrange, Nédélec edge elements, Raviart-Thomas face elements and
//! piecewise constants, linked by the incidence matrices `D0`, `D1`, `D2`.
//!
//! Degrees of freedom are vertex values, edge circulations, face fluxes and
//! cell integrals, each relative to the sorted-vertex orientation of the
//! simplex. Whitney bases are used throughout:
//!
//! * edge `[a, b]`: `λa ∇λb - λb ∇λa`
//! * face `[a, b, c]`: `2 (λa ∇λb × ∇λc + λb ∇λc × ∇λa + λc ∇λa × ∇λb)`
//! * cell: `1 / vol`

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linsolve::CsrMatrix;
use crate::mesh::{Topology, TorMesh, LOCAL_EDGES, LOCAL_FACES};

const QA: f64 = 0.5854101966249685;
const QB: f64 = 0.1381966011250105;

/// Barycentric points of the symmetric 4-point rule, exact for quadratics.
/// Each point carries weight `vol / 4`.
pub const TET_QUAD: [[f64; 4]; 4] = [
    [QA, QB, QB, QB],
    [QB, QA, QB, QB],
    [QB, QB, QA, QB],
    [QB, QB, QB, QA],
];

/// Coefficient vector of a discrete `k`-form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FEField {
    pub level: u8,
    pub coeffs: Vec<f64>,
}

impl FEField {
    pub fn new(level: u8, coeffs: Vec<f64>) -> Self {
        assert!(level <= 3);
        FEField { level, coeffs }
    }

    pub fn zeros(level: u8, n: usize) -> Self {
        Self::new(level, vec![0.0; n])
    }

    pub fn expect_level(&self, level: u8) -> Result<()> {
        if self.level == level {
            Ok(())
        } else {
            Err(Error::LevelMismatch {
                expected: level,
                got: self.level,
            })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldValue {
    Scalar(f64),
    Vector(Vector3<f64>),
}

impl FieldValue {
    pub fn scalar(self) -> f64 {
        match self {
            FieldValue::Scalar(s) => s,
            FieldValue::Vector(_) => panic!("vector value used as scalar"),
        }
    }

    pub fn vector(self) -> Vector3<f64> {
        match self {
            FieldValue::Vector(v) => v,
            FieldValue::Scalar(_) => panic!("scalar value used as vector"),
        }
    }
}

/// Affine data of one tetrahedron.
#[derive(Clone, Copy, Debug)]
pub struct TetGeom {
    pub pts: [Point3<f64>; 4],
    pub vol: f64,
    pub grads: [Vector3<f64>; 4],
}

impl TetGeom {
    pub fn new(pts: [Point3<f64>; 4]) -> Self {
        let j = Matrix3::from_columns(&[pts[1] - pts[0], pts[2] - pts[0], pts[3] - pts[0]]);
        let det = j.determinant();
        // rows of J⁻¹ are ∇λ1..∇λ3; the adjugate keeps power-of-two scaling exact
        let adj = Matrix3::from_rows(&[
            j.column(1).cross(&j.column(2)).transpose(),
            j.column(2).cross(&j.column(0)).transpose(),
            j.column(0).cross(&j.column(1)).transpose(),
        ]);
        let inv = adj / det;
        let g1: Vector3<f64> = inv.row(0).transpose();
        let g2: Vector3<f64> = inv.row(1).transpose();
        let g3: Vector3<f64> = inv.row(2).transpose();
        TetGeom {
            pts,
            vol: det / 6.0,
            grads: [-(g1 + g2 + g3), g1, g2, g3],
        }
    }

    pub fn of(mesh: &TorMesh, t: usize) -> Self {
        Self::new(mesh.tet_points(t))
    }

    pub fn point(&self, bary: &[f64; 4]) -> Point3<f64> {
        Point3::from((0..4).fold(Vector3::zeros(), |acc, i| {
            acc + self.pts[i].coords * bary[i]
        }))
    }

    pub fn edge_basis(&self, la: usize, lb: usize, bary: &[f64; 4]) -> Vector3<f64> {
        self.grads[lb] * bary[la] - self.grads[la] * bary[lb]
    }

    pub fn face_basis(&self, la: usize, lb: usize, lc: usize, bary: &[f64; 4]) -> Vector3<f64> {
        let g = &self.grads;
        (g[lb].cross(&g[lc]) * bary[la]
            + g[lc].cross(&g[la]) * bary[lb]
            + g[la].cross(&g[lb]) * bary[lc])
            * 2.0
    }
}

/// Local vertex positions of the six edges, ordered like the global edge
/// orientation (lower global index first).
pub fn oriented_local_edges(tet: &[usize; 4]) -> [[usize; 2]; 6] {
    LOCAL_EDGES.map(|[i, j]| if tet[i] < tet[j] { [i, j] } else { [j, i] })
}

/// Local vertex positions of the four faces, in global sorted order.
pub fn oriented_local_faces(tet: &[usize; 4]) -> [[usize; 3]; 4] {
    LOCAL_FACES.map(|mut f| {
        f.sort_by_key(|&i| tet[i]);
        f
    })
}

pub struct DeRhamComplex {
    pub counts: [usize; 4],
    pub d0: CsrMatrix,
    pub d1: CsrMatrix,
    pub d2: CsrMatrix,
    pub m0: CsrMatrix,
    pub m1: CsrMatrix,
    pub m2: CsrMatrix,
    /// Diagonal, `1 / vol`.
    pub m3: CsrMatrix,
    /// Mixed edge-face mass matrix, `N1 × N2`.
    pub m12: CsrMatrix,
    pub volumes: Vec<f64>,
}

/// Incidence matrices and mass matrices of the complex.
pub fn assemble_complex(mesh: &TorMesh, topo: &Topology) -> Result<DeRhamComplex> {
    let [n0, n1, n2, n3] = topo.counts();
    let mut t0 = Vec::with_capacity(2 * n1);
    for (e, [a, b]) in topo.edges.iter().enumerate() {
        t0.push((e, *a, -1.0));
        t0.push((e, *b, 1.0));
    }
    let mut t1 = Vec::with_capacity(3 * n2);
    for (f, [a, b, c]) in topo.faces.iter().enumerate() {
        let e = |x, y| topo.edge_index(x, y).expect("face edge exists");
        t1.push((f, e(*b, *c), 1.0));
        t1.push((f, e(*a, *c), -1.0));
        t1.push((f, e(*a, *b), 1.0));
    }
    let mut t2 = Vec::with_capacity(4 * n3);
    for t in 0..n3 {
        for k in 0..4 {
            t2.push((t, topo.tet_faces[t][k], topo.tet_face_signs[t][k]));
        }
    }

    let mut m0 = Vec::with_capacity(16 * n3);
    let mut m1 = Vec::with_capacity(36 * n3);
    let mut m2 = Vec::with_capacity(16 * n3);
    let mut m12 = Vec::with_capacity(24 * n3);
    let mut m3 = Vec::with_capacity(n3);
    let mut volumes = Vec::with_capacity(n3);
    for t in 0..n3 {
        let tet = &mesh.tets[t];
        let g = TetGeom::of(mesh, t);
        if !(g.vol > 0.0) {
            return Err(Error::InvertedCell { tets: vec![t] });
        }
        let le = oriented_local_edges(tet);
        let lf = oriented_local_faces(tet);
        let mut ev = [[Vector3::zeros(); 6]; 4];
        let mut fv = [[Vector3::zeros(); 4]; 4];
        for (q, bary) in TET_QUAD.iter().enumerate() {
            for k in 0..6 {
                ev[q][k] = g.edge_basis(le[k][0], le[k][1], bary);
            }
            for k in 0..4 {
                fv[q][k] = g.face_basis(lf[k][0], lf[k][1], lf[k][2], bary);
            }
        }
        let w = g.vol / 4.0;
        for a in 0..6 {
            for b in 0..6 {
                let s: f64 = (0..4).map(|q| ev[q][a].dot(&ev[q][b])).sum();
                m1.push((topo.tet_edges[t][a], topo.tet_edges[t][b], w * s));
            }
            for b in 0..4 {
                let s: f64 = (0..4).map(|q| ev[q][a].dot(&fv[q][b])).sum();
                m12.push((topo.tet_edges[t][a], topo.tet_faces[t][b], w * s));
            }
        }
        for a in 0..4 {
            for b in 0..4 {
                let s: f64 = (0..4).map(|q| fv[q][a].dot(&fv[q][b])).sum();
                m2.push((topo.tet_faces[t][a], topo.tet_faces[t][b], w * s));
                let p1 = if a == b { 2.0 } else { 1.0 };
                m0.push((tet[a], tet[b], g.vol * p1 / 20.0));
            }
        }
        m3.push((t, t, 1.0 / g.vol));
        volumes.push(g.vol);
    }
    Ok(DeRhamComplex {
        counts: [n0, n1, n2, n3],
        d0: CsrMatrix::from_triplets(n1, n0, &t0),
        d1: CsrMatrix::from_triplets(n2, n1, &t1),
        d2: CsrMatrix::from_triplets(n3, n2, &t2),
        m0: CsrMatrix::from_triplets(n0, n0, &m0),
        m1: CsrMatrix::from_triplets(n1, n1, &m1),
        m2: CsrMatrix::from_triplets(n2, n2, &m2),
        m3: CsrMatrix::from_triplets(n3, n3, &m3),
        m12: CsrMatrix::from_triplets(n1, n2, &m12),
        volumes,
    })
}

/// Value of a discrete form at a barycentric point of tetrahedron `t`.
pub fn eval_field(
    mesh: &TorMesh,
    topo: &Topology,
    field: &FEField,
    t: usize,
    bary: &[f64; 4],
) -> Result<FieldValue> {
    let expected = topo.counts()[field.level as usize];
    if field.coeffs.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            got: field.coeffs.len(),
        });
    }
    let tet = &mesh.tets[t];
    let g = TetGeom::of(mesh, t);
    let c = &field.coeffs;
    Ok(match field.level {
        0 => FieldValue::Scalar((0..4).map(|i| bary[i] * c[tet[i]]).sum()),
        1 => {
            let le = oriented_local_edges(tet);
            FieldValue::Vector((0..6).fold(Vector3::zeros(), |acc, k| {
                acc + g.edge_basis(le[k][0], le[k][1], bary) * c[topo.tet_edges[t][k]]
            }))
        }
        2 => {
            let lf = oriented_local_faces(tet);
            FieldValue::Vector((0..4).fold(Vector3::zeros(), |acc, k| {
                acc + g.face_basis(lf[k][0], lf[k][1], lf[k][2], bary) * c[topo.tet_faces[t][k]]
            }))
        }
        _ => FieldValue::Scalar(c[t] / g.vol),
    })
}

/// Value of a vector-valued form (level 1 or 2) at the centroid of each tetrahedron.
pub fn centroid_vectors(
    mesh: &TorMesh,
    topo: &Topology,
    field: &FEField,
) -> Result<Vec<Vector3<f64>>> {
    if !(field.level == 1 || field.level == 2) {
        return Err(Error::LevelMismatch {
            expected: 1,
            got: field.level,
        });
    }
    (0..mesh.n_tets())
        .map(|t| eval_field(mesh, topo, field, t, &[0.25; 4]).map(FieldValue::vector))
        .collect()
}

/// Edge circulations of a vector field, by 3-point Gauss quadrature along each edge.
pub fn interpolate_edges(
    mesh: &TorMesh,
    topo: &Topology,
    f: impl Fn(&Point3<f64>) -> Vector3<f64>,
) -> FEField {
    // 3-point Gauss-Legendre on [0, 1]
    let s = 0.5 * (0.6f64).sqrt();
    let nodes = [
        (0.5 - s, 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 + s, 5.0 / 18.0),
    ];
    let coeffs = topo
        .edges
        .iter()
        .map(|&[a, b]| {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let d = pb - pa;
            nodes
                .iter()
                .map(|&(x, w)| w * f(&(pa + d * x)).dot(&d))
                .sum()
        })
        .collect();
    FEField::new(1, coeffs)
}
