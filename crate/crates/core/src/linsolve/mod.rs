//! Sparse linear algebra: compressed storage, direct factorizations, and
//! block-preconditioned MINRES for symmetric saddle-point systems.
//!
//! Direct factorizations are delegated to `faer` (supernodal Cholesky and
//! partial-pivoting LU), always run sequentially so that results are
//! reproducible bit for bit.

mod minres;
mod rank;
mod sparse;

pub use minres::{minres, MinresOutcome};
pub use rank::rank_mod_p;
pub use sparse::{dot, norm2, norm_inf, CsrMatrix};

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::ldlt::factor::LdltRegularization;
use faer::linalg::solvers::Solve;
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LdltRef, SymbolicCholesky};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{ColMut, Conj, Par, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Solver family for the mixed systems.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    #[default]
    Direct,
    Minres,
}

impl std::str::FromStr for SolverChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(SolverChoice::Direct),
            "minres" => Ok(SolverChoice::Minres),
            _ => Err(Error::Parse(format!(
                "unknown solver {s:?} (direct|minres)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport {
    pub method: String,
    pub unknowns: usize,
    pub iterations: usize,
    /// `‖b - A x‖₂ / ‖b‖₂`.
    pub relative_residual: f64,
}

#[derive(Clone, Debug)]
pub struct MinresOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MinresOptions {
    fn default() -> Self {
        MinresOptions {
            tol: 1e-11,
            max_iter: 5000,
        }
    }
}

pub enum SaddleMethod {
    Direct,
    /// One symmetric positive definite block per block row; the
    /// preconditioner is their block-diagonal inverse.
    Minres {
        preconditioner: Vec<CsrMatrix>,
        options: MinresOptions,
    },
}

fn sequential() {
    faer::set_global_parallelism(faer::Par::Seq);
}

/// Column-compressed copy for faer. `CsrMatrix` rows become columns, so the
/// transpose is stored; callers pass symmetric matrices or transpose first.
struct Csc {
    n: usize,
    colptr: Vec<usize>,
    rowidx: Vec<usize>,
    vals: Vec<f64>,
}

impl Csc {
    fn of_transpose(a: &CsrMatrix) -> Self {
        Csc {
            n: a.nrows(),
            colptr: a.indptr().to_vec(),
            rowidx: a.indices().to_vec(),
            vals: a.data().to_vec(),
        }
    }

    fn view(&self) -> SparseColMatRef<'_, usize, f64> {
        let sym =
            SymbolicSparseColMatRef::new_checked(self.n, self.n, &self.colptr, None, &self.rowidx);
        SparseColMatRef::new(sym, &self.vals)
    }
}

/// Cholesky factor of a sparse SPD matrix.
pub struct SpdFactor {
    n: usize,
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
}

impl SpdFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::NotPositiveDefinite);
        }
        sequential();
        let csc = Csc::of_transpose(a);
        let llt = csc
            .view()
            .sp_cholesky(Side::Lower)
            .map_err(|_| Error::NotPositiveDefinite)?;
        Ok(SpdFactor { n: a.nrows(), llt })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        self.llt
            .solve_in_place(ColMut::from_slice_mut(&mut x).as_mat_mut());
        x
    }
}

/// LU factor with partial pivoting of a general sparse square matrix.
pub struct LuFactor {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl LuFactor {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::Singular("matrix is not square".into()));
        }
        sequential();
        let csc = Csc::of_transpose(&a.transpose());
        let lu = csc
            .view()
            .sp_lu()
            .map_err(|e| Error::Singular(format!("{e:?}")))?;
        Ok(LuFactor { n: a.nrows(), lu })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x = b.to_vec();
        self.lu
            .solve_in_place(ColMut::from_slice_mut(&mut x).as_mat_mut());
        x
    }
}

/// `LDLᵀ` factor of a sparse symmetric indefinite matrix with a fill-reducing
/// ordering, after symmetric scaling to unit row maxima. Pivots whose sign
/// disagrees with `signs`, or that are below `1e-10`, are replaced by `floor`
/// with the expected sign; callers refine the solution against the original
/// matrix.
pub struct LdltFactor {
    n: usize,
    symbolic: SymbolicCholesky<usize>,
    values: Vec<f64>,
    /// Symmetric equilibration: the factored matrix is `S A S`.
    scaling: Vec<f64>,
}

impl LdltFactor {
    pub fn new(a: &CsrMatrix, signs: &[i8], floor: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || signs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: signs.len(),
            });
        }
        sequential();
        let scaling: Vec<f64> = (0..n)
            .map(|i| {
                let m = a.row(i).fold(0.0f64, |m, (_, v)| m.max(v.abs()));
                if m > 0.0 {
                    1.0 / m.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        let scaled = CsrMatrix::from_triplets(
            n,
            n,
            &a.triplets()
                .map(|(i, j, v)| (i, j, v * scaling[i] * scaling[j]))
                .collect::<Vec<_>>(),
        );
        let csc = Csc::of_transpose(&scaled);
        let view = csc.view();
        let symbolic = factorize_symbolic_cholesky(
            view.symbolic(),
            Side::Lower,
            Default::default(),
            Default::default(),
        )
        .map_err(|e| Error::Singular(format!("{e:?}")))?;
        let mut values = vec![0.0; symbolic.len_val()];
        let reg = LdltRegularization {
            dynamic_regularization_signs: Some(signs),
            dynamic_regularization_delta: floor,
            dynamic_regularization_epsilon: 1e-10,
        };
        let mut buf = MemBuffer::new(
            symbolic.factorize_numeric_ldlt_scratch::<f64>(Par::Seq, Default::default()),
        );
        symbolic
            .factorize_numeric_ldlt(
                &mut values,
                view,
                Side::Lower,
                reg,
                Par::Seq,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .map_err(|e| Error::Singular(format!("{e:?}")))?;
        Ok(LdltFactor {
            n,
            symbolic,
            values,
            scaling,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n);
        let mut x: Vec<f64> = b.iter().zip(&self.scaling).map(|(v, s)| v * s).collect();
        let mut buf = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        LdltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            ColMut::from_slice_mut(&mut x).as_mat_mut(),
            Par::Seq,
            MemStack::new(&mut buf),
        );
        x.iter_mut().zip(&self.scaling).for_each(|(v, s)| *v *= s);
        x
    }
}

fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> (Vec<f64>, f64) {
    let ax = a.mul_vec(x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let nb = norm2(b);
    let rel = if nb > 0.0 { norm2(&r) / nb } else { norm2(&r) };
    (r, rel)
}

/// Refines `x` with the factor until the residual stops improving.
fn refine(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    solve: impl Fn(&[f64]) -> Vec<f64>,
) -> (usize, f64) {
    refine_up_to(a, b, x, solve, 3)
}

fn refine_up_to(
    a: &CsrMatrix,
    b: &[f64],
    x: &mut [f64],
    solve: impl Fn(&[f64]) -> Vec<f64>,
    max_steps: usize,
) -> (usize, f64) {
    let (mut r, mut rel) = relative_residual(a, x, b);
    let mut steps = 0;
    while steps < max_steps && rel > 1e-14 && rel.is_finite() {
        let dx = solve(&r);
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi + di).collect();
        let (r2, rel2) = relative_residual(a, &trial, b);
        if !(rel2 < 0.5 * rel) {
            break;
        }
        x.copy_from_slice(&trial);
        r = r2;
        rel = rel2;
        steps += 1;
    }
    (steps, rel)
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    let f = SpdFactor::new(a)?;
    let mut x = f.solve(b);
    let (steps, rel) = refine(a, b, &mut x, |r| f.solve(r));
    if !rel.is_finite() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok((
        x,
        SolveReport {
            method: "cholesky".into(),
            unknowns: a.nrows(),
            iterations: steps,
            relative_residual: rel,
        },
    ))
}

/// Symmetric block matrix described block by block.
#[derive(Clone, Debug)]
pub struct BlockSystem {
    sizes: Vec<usize>,
    blocks: Vec<(usize, usize, CsrMatrix)>,
    inertia: Option<Vec<i8>>,
    shifts: Vec<(usize, CsrMatrix)>,
}

impl BlockSystem {
    pub fn new(sizes: Vec<usize>) -> Self {
        BlockSystem {
            sizes,
            blocks: vec![],
            inertia: None,
            shifts: vec![],
        }
    }

    /// Adds `m` to diagonal block `i` of the matrix handed to `LDLᵀ` only;
    /// the solution is refined against the unshifted system. Used to make a
    /// semidefinite block definite so that any elimination order is stable.
    pub fn shift(mut self, i: usize, m: CsrMatrix) -> Self {
        assert_eq!((m.nrows(), m.ncols()), (self.sizes[i], self.sizes[i]));
        self.shifts.push((i, m));
        self
    }

    /// Expected pivot sign of each block row. Enables the `LDLᵀ` path of
    /// the direct solver.
    pub fn inertia(mut self, signs: Vec<i8>) -> Self {
        assert_eq!(signs.len(), self.sizes.len());
        self.inertia = Some(signs);
        self
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn offsets(&self) -> Vec<usize> {
        let mut o = vec![0];
        for s in &self.sizes {
            o.push(o.last().unwrap() + s);
        }
        o
    }

    pub fn dim(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Sets a diagonal block.
    pub fn diagonal(mut self, i: usize, m: CsrMatrix) -> Self {
        assert_eq!((m.nrows(), m.ncols()), (self.sizes[i], self.sizes[i]));
        self.blocks.push((i, i, m));
        self
    }

    /// Sets block `(i, j)` to `m` and block `(j, i)` to `mᵀ`.
    pub fn coupling(mut self, i: usize, j: usize, m: CsrMatrix) -> Self {
        assert_ne!(i, j);
        assert_eq!((m.nrows(), m.ncols()), (self.sizes[i], self.sizes[j]));
        self.blocks.push((j, i, m.transpose()));
        self.blocks.push((i, j, m));
        self
    }

    pub fn assemble(&self) -> CsrMatrix {
        let off = self.offsets();
        let mut t = vec![];
        for (bi, bj, m) in &self.blocks {
            t.extend(
                m.triplets()
                    .map(|(i, j, v)| (off[*bi] + i, off[*bj] + j, v)),
            );
        }
        CsrMatrix::from_triplets(self.dim(), self.dim(), &t)
    }

    fn assemble_shifted(&self) -> CsrMatrix {
        let off = self.offsets();
        let mut t = vec![];
        for (bi, bj, m) in &self.blocks {
            t.extend(
                m.triplets()
                    .map(|(i, j, v)| (off[*bi] + i, off[*bj] + j, v)),
            );
        }
        for (b, m) in &self.shifts {
            t.extend(m.triplets().map(|(i, j, v)| (off[*b] + i, off[*b] + j, v)));
        }
        CsrMatrix::from_triplets(self.dim(), self.dim(), &t)
    }
}

/// Solves a symmetric, possibly indefinite, block system.
pub fn solve_saddle(
    system: &BlockSystem,
    rhs: &[f64],
    method: &SaddleMethod,
) -> Result<(Vec<f64>, SolveReport)> {
    let a = system.assemble();
    if rhs.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: rhs.len(),
        });
    }
    match method {
        SaddleMethod::Direct => {
            if let Some(inertia) = &system.inertia {
                let signs: Vec<i8> = system
                    .sizes
                    .iter()
                    .zip(inertia)
                    .flat_map(|(&n, &s)| std::iter::repeat(s).take(n))
                    .collect();
                let shifted = if system.shifts.is_empty() {
                    a.clone()
                } else {
                    system.assemble_shifted()
                };
                // a larger pivot floor survives more cancellation but costs refinement steps
                for floor in [1e-10, 1e-6] {
                    match LdltFactor::new(&shifted, &signs, floor) {
                        Ok(f) => {
                            let mut x = f.solve(rhs);
                            let (steps, rel) = refine_up_to(&a, rhs, &mut x, |r| f.solve(r), 60);
                            if rel <= 1e-12 {
                                let rep = SolveReport {
                                    method: "ldlt".into(),
                                    unknowns: a.nrows(),
                                    iterations: steps,
                                    relative_residual: rel,
                                };
                                return Ok((x, rep));
                            }
                            log::debug!("LDLT (floor {floor:e}) stalled at {rel:e}");
                        }
                        Err(e) => log::debug!("LDLT (floor {floor:e}) failed: {e}"),
                    }
                }
            }
            let f = LuFactor::new(&a)?;
            let mut x = f.solve(rhs);
            let (steps, rel) = refine(&a, rhs, &mut x, |r| f.solve(r));
            if !(rel <= 1e-6) || x.iter().any(|v| !v.is_finite()) {
                return Err(Error::Singular(format!(
                    "relative residual {rel:e} after factorization"
                )));
            }
            Ok((
                x,
                SolveReport {
                    method: "lu".into(),
                    unknowns: a.nrows(),
                    iterations: steps,
                    relative_residual: rel,
                },
            ))
        }
        SaddleMethod::Minres {
            preconditioner,
            options,
        } => {
            if preconditioner.len() != system.sizes.len() {
                return Err(Error::DimensionMismatch {
                    expected: system.sizes.len(),
                    got: preconditioner.len(),
                });
            }
            let factors: Vec<SpdFactor> = preconditioner
                .iter()
                .map(SpdFactor::new)
                .collect::<Result<_>>()?;
            let off = system.offsets();
            let apply = |r: &[f64]| -> Vec<f64> {
                let mut z = vec![0.0; r.len()];
                for (b, f) in factors.iter().enumerate() {
                    z[off[b]..off[b + 1]].copy_from_slice(&f.solve(&r[off[b]..off[b + 1]]));
                }
                z
            };
            let out = minres(&a, rhs, apply, options.tol, options.max_iter);
            if !out.converged {
                return Err(Error::NoConvergence {
                    iterations: out.iterations,
                    residual: out.relative_residual,
                });
            }
            Ok((
                out.x,
                SolveReport {
                    method: "minres".into(),
                    unknowns: a.nrows(),
                    iterations: out.iterations,
                    relative_residual: out.relative_residual,
                },
            ))
        }
    }
}
