//! Helicity of the harmonic magnetic field of a toroidal domain, computed
//! with lowest-order finite element exterior calculus, together with its
//! shape derivative and a shape optimizer for the boundary.
//!
//! The pipeline runs surface → [`mesh`] → [`feec`] complex → [`fields`]
//! (harmonic field, vector potentials, helicity) → [`shapeopt`].

pub mod error;
pub mod feec;
pub mod fields;
pub mod geometry;
pub mod linsolve;
pub mod mesh;
pub mod oracle;
pub mod shapeopt;
pub mod vtk;

pub use error::{Error, Result};
pub use feec::{assemble_complex, eval_field, DeRhamComplex, FEField, FieldValue};
pub use fields::{run_helicity, run_on_mesh, HelicityReport, HelicityRun};
pub use geometry::{
    geometric_functionals, geometric_gradients, BoundaryMap, FourierSurface, GeoReport, GridSpec,
};
pub use linsolve::{SolveReport, SolverChoice};
pub use mesh::{generate_mesh, FrozenPolyhedron, Resolution, Topology, TorMesh};
