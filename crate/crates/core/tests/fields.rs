//! Orthogonality relations of the discrete fields and reproducibility.

use std::f64::consts::PI;
use std::sync::OnceLock;

use helicity_core::fields::{run_helicity, HelicityRun};
use helicity_core::{FourierSurface, Resolution, SolverChoice};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn run() -> &'static HelicityRun {
    static RUN: OnceLock<HelicityRun> = OnceLock::new();
    RUN.get_or_init(|| {
        run_helicity(
            &FourierSurface::twisted_demo(),
            Resolution::new(2, 8, 24),
            SolverChoice::Direct,
        )
        .unwrap()
    })
}

fn random(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn cosine(m: &helicity_core::linsolve::CsrMatrix, x: &[f64], y: &[f64]) -> f64 {
    m.bilinear(x, y) / (m.bilinear(x, x) * m.bilinear(y, y)).sqrt()
}

#[test]
fn b_curl_is_orthogonal_to_gradients() {
    let r = run();
    let c = &r.complex;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..20 {
        let g = c.d0.mul_vec(&random(&mut rng, c.counts[0]));
        assert!(cosine(&c.m1, &r.b_curl.coeffs, &g).abs() < 1e-10);
    }
}

#[test]
fn b_div_is_orthogonal_to_traceless_curls() {
    let r = run();
    let c = &r.complex;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..20 {
        let mut w = random(&mut rng, c.counts[1]);
        for (e, x) in w.iter_mut().enumerate() {
            if r.topo.is_boundary_edge[e] {
                *x = 0.0;
            }
        }
        let curl = c.d1.mul_vec(&w);
        assert!(cosine(&c.m2, &r.b_div.coeffs, &curl).abs() < 1e-10);
    }
}

#[test]
fn b_div_is_tangent_and_solenoidal() {
    let r = run();
    for &f in &r.topo.boundary_faces {
        assert_eq!(r.b_div.coeffs[f], 0.0);
    }
    assert!(r.report.div_residual < 1e-9);
}

#[test]
fn both_potentials_have_curl_b_div() {
    let r = run();
    let c = &r.complex;
    for a in [&r.a1, &r.a2] {
        let curl = c.d1.mul_vec(&a.coeffs);
        let err = curl
            .iter()
            .zip(&r.b_div.coeffs)
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(err < 1e-8, "{err}");
    }
}

#[test]
fn circulations_are_normalized() {
    let rep = &run().report;
    assert!((rep.circ_toroidal_b_curl - 2.0 * PI).abs() < 1e-10);
    assert!(rep.circ_toroidal_a2.abs() < 1e-10);
}

#[test]
fn the_two_harmonic_fields_agree_in_energy() {
    let rep = &run().report;
    let rel = (rep.b_curl_energy - rep.b_div_energy).abs() / rep.b_div_energy;
    assert!(rel < 0.1, "{rel}");
}

#[test]
fn pipeline_is_bitwise_reproducible() {
    let a = &run().report;
    let b = run_helicity(
        &FourierSurface::twisted_demo(),
        Resolution::new(2, 8, 24),
        SolverChoice::Direct,
    )
    .unwrap()
    .report;
    assert_eq!(a.h_l2.to_bits(), b.h_l2.to_bits());
    assert_eq!(a.h_circ.to_bits(), b.h_circ.to_bits());
    assert_eq!(a.b_div_energy.to_bits(), b.b_div_energy.to_bits());
}
