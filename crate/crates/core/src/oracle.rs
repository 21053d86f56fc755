//! Independent helicity estimate through the Biot-Savart operator,
//! `H = ∫ B · BS(B)` with `BS(B)(y) = (1/4π) ∫ B(x) × (y - x) / |y - x|³ dx`.
//!
//! The field is sampled at cell centroids; the singular self-interaction of a
//! cell is dropped, which costs first-order accuracy in the cell size.

use std::f64::consts::PI;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::feec::{centroid_vectors, FEField};
use crate::mesh::{Topology, TorMesh};

/// Point samples of a vector field with quadrature weights.
#[derive(Clone, Debug)]
pub struct QuadField {
    pub points: Vec<Point3<f64>>,
    pub weights: Vec<f64>,
    pub values: Vec<Vector3<f64>>,
}

const BLOCK: usize = 256;

/// One sample per tetrahedron: centroid value with the cell volume as weight.
pub fn sample_field(mesh: &TorMesh, topo: &Topology, field: &FEField) -> Result<QuadField> {
    let values = centroid_vectors(mesh, topo, field)?;
    Ok(from_cell_values(mesh, values))
}

/// Samples from per-cell vectors, e.g. read back from a VTK file.
pub fn from_cell_values(mesh: &TorMesh, values: Vec<Vector3<f64>>) -> QuadField {
    QuadField {
        points: (0..mesh.n_tets()).map(|t| mesh.tet_centroid(t)).collect(),
        weights: (0..mesh.n_tets()).map(|t| mesh.tet_volume(t)).collect(),
        values,
    }
}

impl QuadField {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn check(&self) -> Result<()> {
        let n = self.points.len();
        if self.weights.len() != n || self.values.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: self.values.len().min(self.weights.len()),
            });
        }
        Ok(())
    }
}

/// Biot-Savart field at `y`, skipping the sample `exclude` if given.
pub fn biot_savart_at(q: &QuadField, y: &Point3<f64>, exclude: Option<usize>) -> Vector3<f64> {
    let mut acc = Vector3::zeros();
    for i in 0..q.len() {
        if Some(i) == exclude {
            continue;
        }
        let d = y - q.points[i];
        let r2 = d.norm_squared();
        if r2 == 0.0 {
            continue;
        }
        acc += q.values[i].cross(&d) * (q.weights[i] / (r2 * r2.sqrt()));
    }
    acc / (4.0 * PI)
}

/// Double sum over distinct sample pairs. Each unordered pair is visited once;
/// the integrand is symmetric under exchange, so the sum is doubled.
///
/// Work is split into fixed blocks of rows whose partial sums are added in
/// block order, so the result does not depend on the thread count.
pub fn helicity_oracle(q: &QuadField) -> Result<f64> {
    q.check()?;
    let n = q.len();
    let nblocks = n.div_ceil(BLOCK);
    let partial: Vec<f64> = (0..nblocks)
        .into_par_iter()
        .map(|b| {
            let mut s = 0.0;
            for i in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let (xi, fi, wi) = (q.points[i], q.values[i], q.weights[i]);
                let mut row = 0.0;
                for j in i + 1..n {
                    let d = q.points[j] - xi;
                    let r2 = d.norm_squared();
                    if r2 == 0.0 {
                        continue;
                    }
                    row += q.weights[j] * q.values[j].dot(&fi.cross(&d)) / (r2 * r2.sqrt());
                }
                s += wi * row;
            }
            s
        })
        .collect();
    Ok(2.0 * partial.iter().sum::<f64>() / (4.0 * PI))
}

/// Line integral of the Biot-Savart field along a closed polygon, with
/// two-point Gauss quadrature on each segment.
pub fn biot_savart_circulation(q: &QuadField, polygon: &[Point3<f64>]) -> f64 {
    let g = 0.5 / 3f64.sqrt();
    let mut c = 0.0;
    for k in 0..polygon.len() {
        let (a, b) = (polygon[k], polygon[(k + 1) % polygon.len()]);
        let d = b - a;
        for s in [0.5 - g, 0.5 + g] {
            c += 0.5 * biot_savart_at(q, &(a + d * s), None).dot(&d);
        }
    }
    c
}
