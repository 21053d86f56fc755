use crate::error::{Error, Result};

use super::TorMesh;

/// Local vertex pairs of the six edges of a tetrahedron.
pub const LOCAL_EDGES: [[usize; 2]; 6] = [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]];
/// Local vertex triples of the four faces; face `i` is opposite vertex `i`.
pub const LOCAL_FACES: [[usize; 3]; 4] = [[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]];

pub const NO_TET: usize = usize::MAX;

/// Edges and faces of a tetrahedral mesh with their incidences.
///
/// Edges and faces are stored as sorted vertex tuples, in lexicographic order,
/// and are oriented by that sorted order.
#[derive(Clone, Debug)]
pub struct Topology {
    pub n_vertices: usize,
    pub edges: Vec<[usize; 2]>,
    pub faces: Vec<[usize; 3]>,
    pub tet_edges: Vec<[usize; 6]>,
    pub tet_faces: Vec<[usize; 4]>,
    /// Relative orientation of each tet face: `+1` if its sorted-order normal
    /// points out of the tetrahedron.
    pub tet_face_signs: Vec<[f64; 4]>,
    pub face_tets: Vec<[usize; 2]>,
    pub boundary_faces: Vec<usize>,
    pub is_boundary_face: Vec<bool>,
    pub is_boundary_edge: Vec<bool>,
    pub is_boundary_vertex: Vec<bool>,
}

fn sort3(mut f: [usize; 3]) -> ([usize; 3], f64) {
    let mut parity = 1.0;
    for (a, b) in [(0, 1), (1, 2), (0, 1)] {
        if f[a] > f[b] {
            f.swap(a, b);
            parity = -parity;
        }
    }
    (f, parity)
}

impl Topology {
    pub fn build(mesh: &TorMesh) -> Result<Self> {
        let nt = mesh.n_tets();
        let mut edges = Vec::with_capacity(nt * 6);
        let mut faces = Vec::with_capacity(nt * 4);
        for t in &mesh.tets {
            for [a, b] in LOCAL_EDGES {
                edges.push(if t[a] < t[b] {
                    [t[a], t[b]]
                } else {
                    [t[b], t[a]]
                });
            }
            for f in LOCAL_FACES {
                faces.push(sort3(f.map(|i| t[i])).0);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        faces.sort_unstable();

        // multiplicity check before dedup
        let mut i = 0;
        while i < faces.len() {
            let mut j = i + 1;
            while j < faces.len() && faces[j] == faces[i] {
                j += 1;
            }
            if j - i > 2 {
                return Err(Error::NonManifold {
                    face: faces[i],
                    count: j - i,
                });
            }
            i = j;
        }
        faces.dedup();

        let mut topo = Topology {
            n_vertices: mesh.n_vertices(),
            tet_edges: Vec::with_capacity(nt),
            tet_faces: Vec::with_capacity(nt),
            tet_face_signs: Vec::with_capacity(nt),
            face_tets: vec![[NO_TET; 2]; faces.len()],
            boundary_faces: vec![],
            is_boundary_face: vec![false; faces.len()],
            is_boundary_edge: vec![false; edges.len()],
            is_boundary_vertex: vec![false; mesh.n_vertices()],
            edges,
            faces,
        };
        for (ti, t) in mesh.tets.iter().enumerate() {
            let mut te = [0; 6];
            for (k, [a, b]) in LOCAL_EDGES.into_iter().enumerate() {
                te[k] = topo.edge_index(t[a], t[b]).expect("edge collected above");
            }
            let mut tf = [0; 4];
            let mut ts = [0.0; 4];
            for (k, f) in LOCAL_FACES.into_iter().enumerate() {
                let (sorted, parity) = sort3(f.map(|i| t[i]));
                let fi = topo
                    .faces
                    .binary_search(&sorted)
                    .expect("face collected above");
                tf[k] = fi;
                ts[k] = if k % 2 == 0 { parity } else { -parity };
                let slot = &mut topo.face_tets[fi];
                if slot[0] == NO_TET {
                    slot[0] = ti
                } else {
                    slot[1] = ti
                }
            }
            topo.tet_edges.push(te);
            topo.tet_faces.push(tf);
            topo.tet_face_signs.push(ts);
        }
        for (fi, ft) in topo.face_tets.iter().enumerate() {
            if ft[1] == NO_TET {
                topo.boundary_faces.push(fi);
                topo.is_boundary_face[fi] = true;
                let [a, b, c] = topo.faces[fi];
                for v in [a, b, c] {
                    topo.is_boundary_vertex[v] = true;
                }
                for (x, y) in [(a, b), (a, c), (b, c)] {
                    let e = topo.edge_index(x, y).expect("face edge");
                    topo.is_boundary_edge[e] = true;
                }
            }
        }
        Ok(topo)
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn n_tets(&self) -> usize {
        self.tet_faces.len()
    }

    /// Counts `[N0, N1, N2, N3]`.
    pub fn counts(&self) -> [usize; 4] {
        [
            self.n_vertices,
            self.n_edges(),
            self.n_faces(),
            self.n_tets(),
        ]
    }

    pub fn euler_characteristic(&self) -> i64 {
        let [v, e, f, t] = self.counts().map(|x| x as i64);
        v - e + f - t
    }

    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = if a < b { [a, b] } else { [b, a] };
        self.edges.binary_search(&key).ok()
    }

    pub fn face_index(&self, a: usize, b: usize, c: usize) -> Option<usize> {
        self.faces.binary_search(&sort3([a, b, c]).0).ok()
    }

    /// The boundary face's only tetrahedron and the face's local slot in it.
    pub fn boundary_face_tet(&self, f: usize) -> Result<(usize, usize)> {
        if !self.is_boundary_face[f] {
            return Err(Error::NotBoundary(f));
        }
        let t = self.face_tets[f][0];
        let slot = self.tet_faces[t]
            .iter()
            .position(|&x| x == f)
            .expect("incidence");
        Ok((t, slot))
    }

    pub fn interior_faces(&self) -> Vec<usize> {
        (0..self.n_faces())
            .filter(|&f| !self.is_boundary_face[f])
            .collect()
    }
}
