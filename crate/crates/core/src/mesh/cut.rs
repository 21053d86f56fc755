use std::f64::consts::PI;

use nalgebra::Vector3;

use crate::error::{Error, Result};

use super::{Resolution, Topology, TorMesh};

/// The cutting disk `Σ` (the `v = 0` slice) and the toroidal loop `γ'`
/// (the boundary line at `u = 0`), both oriented along increasing toroidal angle.
#[derive(Clone, Debug)]
pub struct TopologyTags {
    pub sigma_faces: Vec<usize>,
    /// `±1`: whether the face's sorted-order normal points along `e_φ`.
    pub sigma_signs: Vec<f64>,
    pub sigma_vertices: Vec<usize>,
    /// Edges of `γ'` in traversal order with the sign of traversal relative to
    /// the edge orientation.
    pub gamma_prime: Vec<(usize, f64)>,
}

impl TopologyTags {
    /// Right-hand side pattern `s` on faces: `±1` on `Σ`, zero elsewhere.
    pub fn sigma_indicator(&self, n_faces: usize) -> Vec<f64> {
        let mut s = vec![0.0; n_faces];
        for (&f, &sg) in self.sigma_faces.iter().zip(&self.sigma_signs) {
            s[f] = sg;
        }
        s
    }
}

fn structured(mesh: &TorMesh) -> Result<Resolution> {
    mesh.resolution
        .ok_or_else(|| Error::CutNotFound("mesh carries no structured slice information".into()))
}

pub fn tag_cut(mesh: &TorMesh, topo: &Topology) -> Result<TopologyTags> {
    let res = structured(mesh)?;
    let in_sigma = |v: usize| res.slice_of(v) == 0;

    let sigma_vertices: Vec<usize> = (0..res.slice_size()).collect();
    let (mut sigma_faces, mut sigma_signs) = (vec![], vec![]);
    for (fi, f) in topo.faces.iter().enumerate() {
        if !f.iter().all(|&v| in_sigma(v)) {
            continue;
        }
        let [a, b, c] = f.map(|v| mesh.vertices[v]);
        let normal = (b - a).cross(&(c - a));
        let centroid = (a.coords + b.coords + c.coords) / 3.0;
        let phi = centroid.y.atan2(centroid.x);
        let e_phi = Vector3::new(-phi.sin(), phi.cos(), 0.0);
        let d = normal.dot(&e_phi);
        if d == 0.0 {
            return Err(Error::CutNotFound(format!(
                "face {fi} is tangent to the toroidal direction"
            )));
        }
        sigma_faces.push(fi);
        sigma_signs.push(d.signum());
    }
    let sigma_edges: Vec<usize> = (0..topo.n_edges())
        .filter(|&e| topo.edges[e].iter().all(|&v| in_sigma(v)))
        .collect();
    let chi = sigma_vertices.len() as i64 - sigma_edges.len() as i64 + sigma_faces.len() as i64;
    if chi != 1 {
        return Err(Error::CutNotFound(format!(
            "slice has Euler characteristic {chi}, expected a disk"
        )));
    }
    // the rim of the disk must lie on the boundary of the domain
    let mut uses = vec![0usize; topo.n_edges()];
    for &f in &sigma_faces {
        let [a, b, c] = topo.faces[f];
        for (x, y) in [(a, b), (a, c), (b, c)] {
            uses[topo.edge_index(x, y).expect("face edge")] += 1;
        }
    }
    if sigma_edges
        .iter()
        .any(|&e| uses[e] == 1 && !topo.is_boundary_edge[e])
    {
        return Err(Error::CutNotFound(
            "rim of the slice leaves the boundary".into(),
        ));
    }

    let mut gamma_prime = Vec::with_capacity(res.n_v);
    for k in 0..res.n_v {
        let a = res.vertex_index(res.n_rho, 0, k);
        let b = res.vertex_index(res.n_rho, 0, k + 1);
        let e = topo
            .edge_index(a, b)
            .ok_or_else(|| Error::CutNotFound(format!("no edge between {a} and {b}")))?;
        if !topo.is_boundary_edge[e] {
            return Err(Error::CutNotFound(format!(
                "loop edge {e} is not on the boundary"
            )));
        }
        gamma_prime.push((e, if a < b { 1.0 } else { -1.0 }));
    }
    Ok(TopologyTags {
        sigma_faces,
        sigma_signs,
        sigma_vertices,
        gamma_prime,
    })
}

/// Scalar P1 space on `Ω \ Σ`: the vertices of `Σ` are duplicated, and the
/// tetrahedra on the negative side of `Σ` (the last toroidal slab) use the
/// copies. Values on copies are tied to the originals by a jump of `2π`.
#[derive(Clone, Debug)]
pub struct CutMesh {
    pub n_base: usize,
    /// Original vertex of each copy; copy `d` has index `n_base + d`.
    pub duplicates: Vec<usize>,
    /// Copy slot of each original vertex of `Σ`.
    pub copy_of: Vec<Option<usize>>,
    pub tets: Vec<[usize; 4]>,
    pub jump: f64,
}

impl CutMesh {
    pub fn n_vertices(&self) -> usize {
        self.n_base + self.duplicates.len()
    }

    /// Expands values on the original vertices to the cut space.
    pub fn lift(&self, base: &[f64]) -> Vec<f64> {
        let mut out = base.to_vec();
        out.extend(self.duplicates.iter().map(|&v| base[v] + self.jump));
        out
    }

    pub fn is_copy(&self, v: usize) -> bool {
        v >= self.n_base
    }
}

pub fn cut_scalar_space(mesh: &TorMesh, tags: &TopologyTags) -> Result<CutMesh> {
    let res = structured(mesh)?;
    let n_base = mesh.n_vertices();
    let mut copy_of = vec![None; n_base];
    for (d, &v) in tags.sigma_vertices.iter().enumerate() {
        copy_of[v] = Some(d);
    }
    let last = res.n_v - 1;
    let tets = mesh
        .tets
        .iter()
        .map(|t| {
            if t.iter().any(|&v| res.slice_of(v) == last) {
                t.map(|v| match copy_of[v] {
                    Some(d) => n_base + d,
                    None => v,
                })
            } else {
                *t
            }
        })
        .collect();
    Ok(CutMesh {
        n_base,
        duplicates: tags.sigma_vertices.clone(),
        copy_of,
        tets,
        jump: 2.0 * PI,
    })
}
