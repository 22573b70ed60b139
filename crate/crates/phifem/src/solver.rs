//! Sparse LU solves with a residual check.

use faer::prelude::Solve;
use faer::linalg::solvers::PartialPivLu;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseRowMat, SymbolicSparseRowMat};
use faer::Mat;
use phifem_core::sparse::CsrMatrix;

use crate::{Error, Result};

/// Largest accepted `||A x - b|| / ||b||`.
pub const RESIDUAL_LIMIT: f64 = 1e-8;

/// Refinement steps stop once the residual drops below this.
const REFINE_TARGET: f64 = 1e-13;
const MAX_REFINEMENTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// `||A x - b||_2 / ||b||_2`, or the absolute residual when `b = 0`.
    pub relative_residual: f64,
    pub refinements: usize,
    pub nnz: usize,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    let ax = a.matvec(x)?;
    Ok(ax.iter().zip(b).map(|(p, q)| q - p).collect())
}

/// Solves `A x = b` by LU with partial pivoting and a fill-reducing column
/// ordering, followed by up to three steps of iterative refinement.
///
/// Fails if the factorization is structurally singular, if the solution is
/// not finite, or if the final residual exceeds [`RESIDUAL_LIMIT`].
pub fn lu_solve(a: &CsrMatrix, b: &[f64]) -> Result<SolveReport> {
    lu_solve_bordered(a, b, &Border::default())
}

/// Unknowns kept out of the sparse factorization.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Border {
    /// Unknowns eliminated through a dense Schur complement, typically those
    /// with dense rows: a dense row makes the sparse factor dense.
    pub unknowns: Vec<usize>,
    /// An unknown at which the null vector of the remaining block is
    /// nonzero, if that block is singular. Its diagonal is shifted and the
    /// shift compensated by one more bordered unknown.
    pub anchor: Option<usize>,
}

/// As [`lu_solve`], with the unknowns of `border` eliminated densely.
pub fn lu_solve_bordered(a: &CsrMatrix, b: &[f64], border: &Border) -> Result<SolveReport> {
    let n = a.dim();
    if b.len() != n {
        return Err(phifem_core::Error::DimensionMismatch { expected: n, found: b.len() }.into());
    }
    let anchor_in_border = border.anchor.is_some_and(|k| border.unknowns.contains(&k));
    if let Some(&k) = border.unknowns.iter().chain(&border.anchor).find(|&&k| k >= n) {
        return Err(phifem_core::Error::IndexOutOfRange { row: k, col: k, dim: n }.into());
    }
    if anchor_in_border {
        return Err(Error::Singular("the anchor must stay in the sparse block".into()));
    }
    if a.values().iter().any(|v| !v.is_finite()) || b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("non-finite matrix or right-hand side".into()));
    }
    let solver = Bordered::new(a, border)?;

    let scale = match norm2(b) {
        s if s > 0.0 => s,
        _ => 1.0,
    };
    let mut x = solver.solve(b);
    let mut r = residual(a, &x, b)?;
    let mut rel = norm2(&r) / scale;
    let mut refinements = 0;
    while rel.is_finite() && rel > REFINE_TARGET && refinements < MAX_REFINEMENTS {
        let dx = solver.solve(&r);
        let candidate: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let rc = residual(a, &candidate, b)?;
        let relc = norm2(&rc) / scale;
        refinements += 1;
        if !(relc < rel) {
            break;
        }
        x = candidate;
        r = rc;
        rel = relc;
    }
    if !rel.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular("factorization produced non-finite values".into()));
    }
    if rel > RESIDUAL_LIMIT {
        return Err(Error::Residual { residual: rel, limit: RESIDUAL_LIMIT });
    }
    Ok(SolveReport { solution: x, relative_residual: rel, refinements, nnz: a.nnz() })
}

/// `[K B; C D]` with `K` factored sparse and the Schur complement
/// `D - C K^-1 B` factored dense. With an anchor `a` and shift `s`, `K` is
/// replaced by `K + s e_a e_a^T` and the border gains `t = x_a` with column
/// `-s e_a`, row `e_a^T` and diagonal `-1`.
struct Bordered {
    /// position of each unknown inside `K`, or `None` for border unknowns
    inner: Vec<Option<usize>>,
    /// original index of each border unknown; `None` for the anchor copy
    border: Vec<Option<usize>>,
    lu: Lu<usize, f64>,
    /// `K^-1 B`, one column per border unknown
    kb: Mat<f64>,
    /// rows of `C`: `(inner index, value)`
    c: Vec<Vec<(usize, f64)>>,
    schur: PartialPivLu<f64>,
}

impl Bordered {
    fn new(a: &CsrMatrix, wanted: &Border) -> Result<Self> {
        let n = a.dim();
        let mut inner = vec![None; n];
        let mut border: Vec<Option<usize>> = Vec::new();
        let mut border_pos = vec![usize::MAX; n];
        let mut m = 0;
        for (i, slot) in inner.iter_mut().enumerate() {
            if wanted.unknowns.contains(&i) {
                border_pos[i] = border.len();
                border.push(Some(i));
            } else {
                *slot = Some(m);
                m += 1;
            }
        }
        let anchor = wanted.anchor.map(|k| (k, a.max_abs().max(f64::MIN_POSITIVE)));
        if anchor.is_some() {
            border.push(None);
        }
        let nb = border.len();

        let mut row_ptr = Vec::with_capacity(m + 1);
        let mut cols = Vec::with_capacity(a.nnz() + 1);
        let mut vals = Vec::with_capacity(a.nnz() + 1);
        let mut b = Mat::<f64>::zeros(m, nb);
        let mut c = vec![Vec::new(); nb];
        let mut d = Mat::<f64>::zeros(nb, nb);
        row_ptr.push(0);
        for r in 0..n {
            // the shifted diagonal, inserted in column order
            let mut shift = anchor.filter(|&(k, _)| k == r).map(|(k, s)| (inner[k].expect("anchor is inner"), s));
            for (col, v) in a.row(r) {
                match (inner[r], inner[col]) {
                    (Some(i), Some(j)) => {
                        if let Some((ka, s)) = shift {
                            if j >= ka {
                                if j == ka {
                                    cols.push(j);
                                    vals.push(v + s);
                                    shift = None;
                                    continue;
                                }
                                cols.push(ka);
                                vals.push(s);
                                shift = None;
                            }
                        }
                        let _ = i;
                        cols.push(j);
                        vals.push(v);
                    }
                    (Some(i), None) => b[(i, border_pos[col])] = v,
                    (None, Some(j)) => c[border_pos[r]].push((j, v)),
                    (None, None) => d[(border_pos[r], border_pos[col])] = v,
                }
            }
            if let Some((ka, s)) = shift {
                cols.push(ka);
                vals.push(s);
            }
            if inner[r].is_some() {
                row_ptr.push(cols.len());
            }
        }
        if let Some((k, s)) = anchor {
            let ka = inner[k].expect("anchor is inner");
            b[(ka, nb - 1)] = -s;
            c[nb - 1].push((ka, 1.0));
            d[(nb - 1, nb - 1)] = -1.0;
        }
        let symbolic = SymbolicSparseRowMat::<usize>::new_checked(m, m, row_ptr, None, cols);
        let lu = SparseRowMat::new(symbolic, vals).sp_lu().map_err(|e| match e {
            LuError::SymbolicSingular { index } => Error::Singular(format!("no pivot at step {index}")),
            LuError::Generic(e) => Error::Singular(format!("{e:?}")),
        })?;
        let mut kb = b;
        if nb > 0 {
            lu.solve_in_place(kb.as_mut());
        }
        let mut s = d;
        for (k, row) in c.iter().enumerate() {
            for l in 0..nb {
                s[(k, l)] -= row.iter().map(|&(j, v)| v * kb[(j, l)]).sum::<f64>();
            }
        }
        let schur = s.partial_piv_lu();
        Ok(Bordered { inner, border, lu, kb, c, schur })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = self.kb.nrows();
        let nb = self.border.len();
        let mut y = Mat::<f64>::zeros(m, 1);
        for (i, slot) in self.inner.iter().enumerate() {
            if let Some(k) = slot {
                y[(*k, 0)] = rhs[i];
            }
        }
        self.lu.solve_in_place(y.as_mut());
        let mut x = vec![0.0; rhs.len()];
        if nb > 0 {
            let z = Mat::<f64>::from_fn(nb, 1, |k, _| {
                let r = self.border[k].map_or(0.0, |i| rhs[i]);
                r - self.c[k].iter().map(|&(j, v)| v * y[(j, 0)]).sum::<f64>()
            });
            let z = self.schur.solve(&z);
            for (k, i) in self.border.iter().enumerate() {
                if let Some(i) = i {
                    x[*i] = z[(k, 0)];
                }
            }
            for j in 0..m {
                let correction: f64 = (0..nb).map(|k| self.kb[(j, k)] * z[(k, 0)]).sum();
                y[(j, 0)] -= correction;
            }
        }
        for (i, slot) in self.inner.iter().enumerate() {
            if let Some(k) = slot {
                x[i] = y[(*k, 0)];
            }
        }
        x
    }
}
