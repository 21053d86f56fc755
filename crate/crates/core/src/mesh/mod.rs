//! Structured tetrahedral meshes of solid tori.
//!
//! Vertices sit on `n_rho` nested rings per toroidal slice, interpolated
//! linearly between a per-slice axis point and the boundary samples. Hexahedral
//! cells are cut into six tetrahedra by the Freudenthal (Kuhn) rule applied in
//! the structured index space; the cells touching the axis are prisms, cut
//! into three. Both rules are translation invariant on the periodic index
//! lattice, so neighbouring cells always agree on the shared face diagonals.

mod cut;
mod topology;

pub use cut::{cut_scalar_space, tag_cut, CutMesh, TopologyTags};
pub use topology::{Topology, LOCAL_EDGES, LOCAL_FACES, NO_TET};

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundaryMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Resolution {
    pub n_rho: usize,
    pub n_u: usize,
    pub n_v: usize,
}

impl Resolution {
    pub const fn new(n_rho: usize, n_u: usize, n_v: usize) -> Self {
        Resolution { n_rho, n_u, n_v }
    }

    /// Vertices per toroidal slice: one axis point plus the rings.
    pub fn slice_size(&self) -> usize {
        1 + self.n_rho * self.n_u
    }

    pub fn n_vertices(&self) -> usize {
        self.n_v * self.slice_size()
    }

    pub fn n_tets(&self) -> usize {
        self.n_v * self.n_u * (3 + 6 * (self.n_rho - 1))
    }

    /// Same resolution with every count multiplied by `k`.
    pub fn refined(&self, k: usize) -> Self {
        Resolution::new(self.n_rho * k, self.n_u * k, self.n_v * k)
    }

    /// Global index of the vertex on ring `ring` (0 is the axis), poloidal
    /// index `j` and toroidal index `k`; `j` and `k` wrap.
    pub fn vertex_index(&self, ring: usize, j: usize, k: usize) -> usize {
        let base = (k % self.n_v) * self.slice_size();
        if ring == 0 {
            base
        } else {
            base + 1 + (ring - 1) * self.n_u + j % self.n_u
        }
    }

    /// Toroidal slice of a vertex.
    pub fn slice_of(&self, vertex: usize) -> usize {
        vertex / self.slice_size()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rho < 2 || self.n_u < 8 || self.n_v < 16 {
            return Err(Error::InvalidResolution(format!(
                "need n_rho >= 2, n_u >= 8, n_v >= 16; got {self}"
            )));
        }
        Ok(())
    }
}

impl std::fmt::Display for Resolution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{},{}", self.n_rho, self.n_u, self.n_v)
    }
}

impl std::str::FromStr for Resolution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<usize> = s
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Parse(format!("resolution {s:?}: {e}")))?;
        match parts[..] {
            [r, u, v] => {
                let res = Resolution::new(r, u, v);
                res.validate()?;
                Ok(res)
            }
            _ => Err(Error::Parse(format!(
                "resolution {s:?}: expected n_rho,n_u,n_v"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TorMesh {
    pub vertices: Vec<Point3<f64>>,
    /// Positively oriented tetrahedra.
    pub tets: Vec<[usize; 4]>,
    /// Surface parameters of boundary vertices, `None` in the interior.
    pub boundary_uv: Vec<Option<[f64; 2]>>,
    /// Present for meshes built by [`generate_mesh`].
    pub resolution: Option<Resolution>,
}

/// Signed volume of the tetrahedron `(a, b, c, d)`.
pub fn signed_volume(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>, d: &Point3<f64>) -> f64 {
    (b - a).cross(&(c - a)).dot(&(d - a)) / 6.0
}

impl TorMesh {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tets.len()
    }

    pub fn tet_points(&self, t: usize) -> [Point3<f64>; 4] {
        self.tets[t].map(|i| self.vertices[i])
    }

    pub fn tet_volume(&self, t: usize) -> f64 {
        let [a, b, c, d] = self.tet_points(t);
        signed_volume(&a, &b, &c, &d)
    }

    pub fn total_volume(&self) -> f64 {
        (0..self.n_tets()).map(|t| self.tet_volume(t)).sum()
    }

    pub fn tet_centroid(&self, t: usize) -> Point3<f64> {
        let p = self.tet_points(t);
        Point3::from((p[0].coords + p[1].coords + p[2].coords + p[3].coords) / 4.0)
    }

    /// Largest edge length over all tetrahedra.
    pub fn max_edge_length(&self) -> f64 {
        let mut h = 0.0f64;
        for t in 0..self.n_tets() {
            let p = self.tet_points(t);
            for [i, j] in LOCAL_EDGES {
                h = h.max((p[i] - p[j]).norm());
            }
        }
        h
    }

    /// Ratio of longest edge to inradius, normalized to 1 for the regular tetrahedron.
    pub fn aspect_ratio(&self, t: usize) -> f64 {
        let p = self.tet_points(t);
        let vol = self.tet_volume(t).abs();
        let area: f64 = LOCAL_FACES
            .iter()
            .map(|f| (p[f[1]] - p[f[0]]).cross(&(p[f[2]] - p[f[0]])).norm() / 2.0)
            .sum();
        let inradius = 3.0 * vol / area;
        let hmax = LOCAL_EDGES
            .iter()
            .map(|e| (p[e[0]] - p[e[1]]).norm())
            .fold(0.0, f64::max);
        hmax / (2.0 * 6f64.sqrt() * inradius)
    }

    /// Uniformly scaled copy. Power-of-two factors are exact.
    pub fn scaled(&self, lambda: f64) -> TorMesh {
        let mut m = self.clone();
        m.vertices.iter_mut().for_each(|p| *p *= lambda);
        m
    }
}

/// Surface points sampled from a coarse structured mesh and interpolated
/// piecewise linearly on its boundary triangles. Refined meshes built on it
/// all share the same polyhedral boundary.
#[derive(Clone, Debug)]
pub struct FrozenPolyhedron {
    n_u: usize,
    n_v: usize,
    samples: Vec<Point3<f64>>,
}

impl FrozenPolyhedron {
    pub fn new(map: &impl BoundaryMap, n_u: usize, n_v: usize) -> Self {
        let mut samples = Vec::with_capacity(n_u * n_v);
        for k in 0..n_v {
            for j in 0..n_u {
                samples.push(map.point(j as f64 / n_u as f64, k as f64 / n_v as f64));
            }
        }
        FrozenPolyhedron { n_u, n_v, samples }
    }

    fn sample(&self, j: usize, k: usize) -> Point3<f64> {
        self.samples[(k % self.n_v) * self.n_u + j % self.n_u]
    }
}

impl BoundaryMap for FrozenPolyhedron {
    fn point(&self, u: f64, v: f64) -> Point3<f64> {
        let (su, sv) = (
            u.rem_euclid(1.0) * self.n_u as f64,
            v.rem_euclid(1.0) * self.n_v as f64,
        );
        let (j, k) = (su.floor() as usize, sv.floor() as usize);
        let (s, t) = (su - j as f64, sv - k as f64);
        let p00 = self.sample(j, k);
        let p11 = self.sample(j + 1, k + 1);
        // boundary quads are split along the (j, k)-(j+1, k+1) diagonal
        if s >= t {
            let p10 = self.sample(j + 1, k);
            p00 + (p10 - p00) * s + (p11 - p10) * t
        } else {
            let p01 = self.sample(j, k + 1);
            p00 + (p01 - p00) * t + (p11 - p01) * s
        }
    }
}

/// Area-weighted centroid of a closed polygon, via a fan from the vertex mean.
fn polygon_centroid(ring: &[Point3<f64>]) -> Point3<f64> {
    let n = ring.len() as f64;
    let mean = ring.iter().fold(Vector3::zeros(), |acc, p| acc + p.coords) / n;
    let (mut acc, mut wsum) = (Vector3::zeros(), 0.0);
    for i in 0..ring.len() {
        let (a, b) = (ring[i].coords, ring[(i + 1) % ring.len()].coords);
        let w = (a - mean).cross(&(b - mean)).norm();
        acc += w * (a + b + mean) / 3.0;
        wsum += w;
    }
    if wsum > 0.0 {
        Point3::from(acc / wsum)
    } else {
        Point3::from(mean)
    }
}

/// Tetrahedra of the structured split, before orientation fixing.
fn template_tets(res: Resolution) -> Vec<[usize; 4]> {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let vid = |i: usize, j: usize, k: usize| res.vertex_index(i, j, k);
    let mut tets = Vec::with_capacity(res.n_tets());
    for k in 0..res.n_v {
        for j in 0..res.n_u {
            let (a, a1) = (vid(0, 0, k), vid(0, 0, k + 1));
            let (p, q) = (vid(1, j, k), vid(1, j + 1, k));
            let (p1, q1) = (vid(1, j, k + 1), vid(1, j + 1, k + 1));
            tets.push([a, a1, p1, q1]);
            tets.push([a, p, q, q1]);
            tets.push([a, p, q1, p1]);
            for i in 1..res.n_rho {
                for perm in PERMS {
                    let mut c = [0usize; 3];
                    let mut tet = [vid(i, j, k); 4];
                    for (s, &axis) in perm.iter().enumerate() {
                        c[axis] = 1;
                        tet[s + 1] = vid(i + c[0], j + c[1], k + c[2]);
                    }
                    tets.push(tet);
                }
            }
        }
    }
    tets
}

fn place_vertices(
    map: &impl BoundaryMap,
    res: Resolution,
) -> (Vec<Point3<f64>>, Vec<Option<[f64; 2]>>) {
    let mut verts = vec![Point3::origin(); res.n_vertices()];
    let mut uv = vec![None; res.n_vertices()];
    for k in 0..res.n_v {
        let v = k as f64 / res.n_v as f64;
        let ring: Vec<Point3<f64>> = (0..res.n_u)
            .map(|j| map.point(j as f64 / res.n_u as f64, v))
            .collect();
        let axis = polygon_centroid(&ring);
        verts[res.vertex_index(0, 0, k)] = axis;
        for i in 1..=res.n_rho {
            let rho = i as f64 / res.n_rho as f64;
            for (j, s) in ring.iter().enumerate() {
                let idx = res.vertex_index(i, j, k);
                verts[idx] = if i == res.n_rho {
                    *s
                } else {
                    axis + (s - axis) * rho
                };
                if i == res.n_rho {
                    uv[idx] = Some([j as f64 / res.n_u as f64, v]);
                }
            }
        }
    }
    (verts, uv)
}

/// Builds the structured mesh of the solid torus bounded by `map`.
///
/// Every tetrahedron must come out with the orientation it has on a reference
/// circular torus (up to one global sign, which depends on the handedness of
/// the parametrization); any other tetrahedron is folded and reported through
/// [`Error::InvertedCell`].
pub fn generate_mesh(map: &impl BoundaryMap, res: Resolution) -> Result<TorMesh> {
    res.validate()?;
    let mut tets = template_tets(res);
    let (verts, boundary_uv) = place_vertices(map, res);

    let reference = ReferenceTorus;
    let (ref_verts, _) = place_vertices(&reference, res);

    let signed: Vec<f64> = tets
        .iter()
        .map(|t| signed_volume(&verts[t[0]], &verts[t[1]], &verts[t[2]], &verts[t[3]]))
        .collect();
    let expected: Vec<f64> = tets
        .iter()
        .map(|t| {
            signed_volume(
                &ref_verts[t[0]],
                &ref_verts[t[1]],
                &ref_verts[t[2]],
                &ref_verts[t[3]],
            )
            .signum()
        })
        .collect();
    let global: f64 = signed
        .iter()
        .zip(&expected)
        .map(|(s, e)| s * e)
        .sum::<f64>()
        .signum();
    let scale = signed.iter().map(|s| s.abs()).fold(0.0, f64::max);

    let bad: Vec<usize> = (0..tets.len())
        .filter(|&t| !(signed[t] * expected[t] * global > 1e-12 * scale))
        .collect();
    if !bad.is_empty() {
        return Err(Error::InvertedCell { tets: bad });
    }
    for (t, s) in tets.iter_mut().zip(&signed) {
        if *s < 0.0 {
            t.swap(2, 3);
        }
    }

    let mesh = TorMesh {
        vertices: verts,
        tets,
        boundary_uv,
        resolution: Some(res),
    };
    let worst = (0..mesh.n_tets())
        .map(|t| mesh.aspect_ratio(t))
        .fold(0.0, f64::max);
    if worst > 50.0 {
        log::warn!("mesh {res}: worst tetrahedron aspect ratio {worst:.1}");
    }
    Ok(mesh)
}

struct ReferenceTorus;

impl BoundaryMap for ReferenceTorus {
    fn point(&self, u: f64, v: f64) -> Point3<f64> {
        let (su, cu) = (2.0 * PI * u).sin_cos();
        let (sv, cv) = (2.0 * PI * v).sin_cos();
        let r = 1.0 + 0.5 * cu;
        Point3::new(r * cv, r * sv, 0.5 * su)
    }
}
