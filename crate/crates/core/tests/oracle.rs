//! Biot-Savart estimates against literal double sums and symmetry.

use std::f64::consts::PI;

use helicity_core::fields::run_helicity;
use helicity_core::oracle::{biot_savart_circulation, helicity_oracle, sample_field, QuadField};
use helicity_core::{FourierSurface, Resolution, SolverChoice};
use nalgebra::{Point3, Vector3};

/// `(1/4π) Σ_i Σ_{j≠i} w_i w_j B_i · (B_j × (x_i - x_j)) / |x_i - x_j|³`,
/// written out with no pair folding and no blocking.
fn literal(q: &QuadField) -> f64 {
    let mut h = 0.0;
    for i in 0..q.len() {
        for j in 0..q.len() {
            if i == j {
                continue;
            }
            let d = q.points[i] - q.points[j];
            h += q.weights[i] * q.weights[j] * q.values[i].dot(&q.values[j].cross(&d))
                / d.norm().powi(3);
        }
    }
    h / (4.0 * PI)
}

fn coarse_sample() -> QuadField {
    let run = run_helicity(
        &FourierSurface::twisted_demo(),
        Resolution::new(2, 8, 16),
        SolverChoice::Direct,
    )
    .unwrap();
    sample_field(&run.mesh, &run.topo, &run.b_div).unwrap()
}

#[test]
fn folded_pair_sum_matches_literal_double_sum() {
    let q = coarse_sample();
    let fast = helicity_oracle(&q).unwrap();
    let slow = literal(&q);
    assert!(
        (fast - slow).abs() <= 1e-12 * slow.abs(),
        "{fast} vs {slow}"
    );
}

#[test]
fn scaling_and_mirror_laws() {
    let q = coarse_sample();
    let h = helicity_oracle(&q).unwrap();
    let lambda = 2.5;
    // B scales like 1/λ for a field normalized by its circulation, so the
    // double integral picks up λ⁶ · λ⁻² · λ⁻² = λ²
    let scaled = QuadField {
        points: q
            .points
            .iter()
            .map(|p| Point3::from(p.coords * lambda))
            .collect(),
        weights: q.weights.iter().map(|w| w * lambda.powi(3)).collect(),
        values: q.values.iter().map(|v| v / lambda).collect(),
    };
    let hs = helicity_oracle(&scaled).unwrap();
    assert!(
        (hs - lambda * lambda * h).abs() <= 1e-12 * hs.abs(),
        "{hs} vs {h}"
    );
    let mirror = |v: &Vector3<f64>| Vector3::new(v.x, v.y, -v.z);
    let reflected = QuadField {
        points: q
            .points
            .iter()
            .map(|p| Point3::from(mirror(&p.coords)))
            .collect(),
        weights: q.weights.clone(),
        values: q.values.iter().map(mirror).collect(),
    };
    assert!((helicity_oracle(&reflected).unwrap() + h).abs() <= 1e-12 * h.abs());
}

#[test]
fn axisymmetric_field_has_no_toroidal_biot_savart_circulation() {
    let res = Resolution::new(2, 8, 32);
    let run = run_helicity(
        &FourierSurface::circular_torus(1.0, 0.2),
        res,
        SolverChoice::Direct,
    )
    .unwrap();
    let q = sample_field(&run.mesh, &run.topo, &run.b_div).unwrap();
    let loop_pts: Vec<Point3<f64>> = run
        .tags
        .gamma_prime
        .iter()
        .map(|&(e, s)| {
            let [a, b] = run.topo.edges[e];
            run.mesh.vertices[if s > 0.0 { a } else { b }]
        })
        .collect();
    let c = biot_savart_circulation(&q, &loop_pts);
    // compare with the poloidal circulation of the same operator, which
    // links the toroidal flux of B and is of order one
    let section: Vec<Point3<f64>> = (0..64)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / 64.0;
            Point3::new(1.0 + 0.3 * t.cos(), 0.0, 0.3 * t.sin())
        })
        .collect();
    let flux_scale = biot_savart_circulation(&q, &section).abs();
    assert!(flux_scale > 0.05, "{flux_scale}");
    // the discrete field carries small poloidal components from the
    // tetrahedral split, so the circulation vanishes only up to those
    assert!(c.abs() < 5e-3 * flux_scale, "{c} vs {flux_scale}");
}
