//! Cohomology of the discrete complex and the combinatorics of the cut.

use helicity_core::feec::assemble_complex;
use helicity_core::linsolve::rank_mod_p;
use helicity_core::mesh::{generate_mesh, tag_cut, Resolution, Topology, TorMesh, NO_TET};
use helicity_core::FourierSurface;

fn build(s: &FourierSurface, res: Resolution) -> (TorMesh, Topology) {
    let m = generate_mesh(s, res).unwrap();
    let t = Topology::build(&m).unwrap();
    (m, t)
}

fn surfaces() -> Vec<FourierSurface> {
    vec![
        FourierSurface::circular_torus(1.0, 0.3),
        FourierSurface::twisted_demo(),
    ]
}

#[test]
fn betti_numbers_of_the_solid_torus() {
    for s in surfaces() {
        let (m, topo) = build(&s, Resolution::new(2, 8, 16));
        let c = assemble_complex(&m, &topo).unwrap();
        let [n0, n1, n2, n3] = c.counts;
        let (r0, r1, r2) = (rank_mod_p(&c.d0), rank_mod_p(&c.d1), rank_mod_p(&c.d2));
        assert_eq!(n0 - r0, 1, "b0");
        assert_eq!(n1 - r0 - r1, 1, "dim K_h^1");
        assert_eq!(n2 - r1 - r2, 0, "b2");
        assert_eq!(n3 - r2, 0, "b3");
    }
}

#[test]
fn traceless_harmonic_faces_are_one_dimensional() {
    // D1 and D2 restricted to interior edges and faces: the complex with
    // vanishing boundary traces has second cohomology of dimension 1
    for s in surfaces() {
        let (m, topo) = build(&s, Resolution::new(2, 8, 16));
        let c = assemble_complex(&m, &topo).unwrap();
        let faces = topo.interior_faces();
        let edges: Vec<usize> = (0..topo.n_edges())
            .filter(|&e| !topo.is_boundary_edge[e])
            .collect();
        let tets: Vec<usize> = (0..topo.n_tets()).collect();
        let d1 = c.d1.select(&faces, &edges);
        let d2 = c.d2.select(&tets, &faces);
        let ker_d2 = faces.len() - rank_mod_p(&d2);
        assert_eq!(ker_d2 - rank_mod_p(&d1), 1);
    }
}

#[test]
fn faces_have_one_or_two_neighbours() {
    let (_, topo) = build(&FourierSurface::twisted_demo(), Resolution::new(3, 8, 16));
    for f in 0..topo.n_faces() {
        let [a, b] = topo.face_tets[f];
        assert_ne!(a, NO_TET);
        assert_eq!(topo.is_boundary_face[f], b == NO_TET, "face {f}");
    }
}

#[test]
fn single_tetrahedron() {
    let m = TorMesh {
        vertices: vec![
            [0.0, 0.0, 0.0].into(),
            [1.0, 0.0, 0.0].into(),
            [0.0, 1.0, 0.0].into(),
            [0.0, 0.0, 1.0].into(),
        ],
        tets: vec![[0, 1, 2, 3]],
        boundary_uv: vec![None; 4],
        resolution: None,
    };
    let t = Topology::build(&m).unwrap();
    assert_eq!(t.counts(), [4, 6, 4, 1]);
    assert_eq!(t.boundary_faces.len(), 4);
    assert_eq!(t.euler_characteristic(), 1);
}

#[test]
fn toroidal_loop_winds_once() {
    for res in [Resolution::new(2, 8, 16), Resolution::new(3, 10, 24)] {
        let (m, topo) = build(&FourierSurface::twisted_demo(), res);
        let tags = tag_cut(&m, &topo).unwrap();
        let ring_pos = |v: usize| {
            let local = v % res.slice_size();
            assert!(local > 0, "axis vertex on the boundary loop");
            (res.slice_of(v) as i64, ((local - 1) % res.n_u) as i64)
        };
        let wrap = |d: i64, n: usize| {
            let n = n as i64;
            (d + n / 2).rem_euclid(n) - n / 2
        };
        let (mut dv, mut du) = (0, 0);
        let mut prev_head = None;
        for &(e, s) in &tags.gamma_prime {
            assert!(topo.is_boundary_edge[e]);
            let [a, b] = topo.edges[e];
            let (tail, head) = if s > 0.0 { (a, b) } else { (b, a) };
            if let Some(p) = prev_head {
                assert_eq!(p, tail, "path is not connected");
            }
            prev_head = Some(head);
            let (v0, u0) = ring_pos(tail);
            let (v1, u1) = ring_pos(head);
            dv += wrap(v1 - v0, res.n_v);
            du += wrap(u1 - u0, res.n_u);
        }
        let first = tags.gamma_prime[0];
        let start = if first.1 > 0.0 {
            topo.edges[first.0][0]
        } else {
            topo.edges[first.0][1]
        };
        assert_eq!(prev_head, Some(start), "path is not closed");
        assert_eq!(dv, res.n_v as i64);
        assert_eq!(du, 0);
    }
}

#[test]
fn cut_disk_spans_the_section() {
    let res = Resolution::new(2, 8, 16);
    let (m, topo) = build(&FourierSurface::circular_torus(1.0, 0.3), res);
    let tags = tag_cut(&m, &topo).unwrap();
    assert_eq!(tags.sigma_vertices.len(), 1 + 2 * 8);
    // Σ as a 2-chain: its boundary is a single loop of boundary edges
    let c = assemble_complex(&m, &topo).unwrap();
    let chain = tags.sigma_indicator(topo.n_faces());
    let rim = c.d1.tr_mul_vec(&chain);
    let rim_edges: Vec<usize> = (0..rim.len()).filter(|&e| rim[e] != 0.0).collect();
    assert_eq!(rim_edges.len(), 8);
    assert!(rim_edges
        .iter()
        .all(|&e| topo.is_boundary_edge[e] && rim[e].abs() == 1.0));
    // and the chain has no interior boundary: a closed loop has zero D0-boundary
    let loop_boundary = c.d0.tr_mul_vec(&rim);
    assert!(loop_boundary.iter().all(|&x| x == 0.0));
}
