//! Dense and sparse symmetric factorization kernels.
//!
//! All "Sigma^-1 x" expressions are realized as factor solves; explicit
//! inverses are never formed. Indefinite inputs are retried with a diagonal
//! jitter of `eps * mean(diag)`, `eps` escalating in decade steps from 1e-10
//! to 1e-6, before giving up.

use nalgebra::{DMatrix, DVector};
use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};

mod dense;
mod ordering;
mod sparse;

pub use dense::DenseCholesky;
pub use ordering::min_degree_order;
pub use sparse::{SparseCholesky, SparseSymbolic};

/// Jitter escalation ladder, as a multiple of the mean diagonal.
pub(crate) const JITTER_LADDER: [f64; 5] = [1e-10, 1e-9, 1e-8, 1e-7, 1e-6];

/// Dense symmetric matrix. Construction mirrors the lower triangle so the
/// stored matrix is symmetric by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricMatrix {
    m: DMatrix<f64>,
}

impl SymmetricMatrix {
    /// Builds from a function evaluated on the lower triangle (`i >= j`)
    /// only; the strict upper triangle is mirrored.
    pub fn from_lower_fn<F: FnMut(usize, usize) -> f64>(n: usize, mut f: F) -> Self {
        let mut m = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in j..n {
                let v = f(i, j);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        SymmetricMatrix { m }
    }

    /// Wraps an existing matrix, requiring exact symmetry.
    pub fn from_dmatrix(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dim(format!("matrix is {}x{}, not square", m.nrows(), m.ncols())));
        }
        for j in 0..m.ncols() {
            for i in (j + 1)..m.nrows() {
                if m[(i, j)] != m[(j, i)] {
                    return Err(Error::data(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymmetricMatrix { m })
    }

    pub fn order(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_dmatrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_dmatrix(self) -> DMatrix<f64> {
        self.m
    }

    pub(crate) fn diag_mean(&self) -> f64 {
        self.m.diagonal().mean()
    }

    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        dense::factor(self).map(CholeskyFactor::Dense)
    }
}

/// Sparsity pattern of the lower triangle (diagonal included) in compressed
/// sparse column form. Row indices are strictly increasing within each
/// column and every column starts with its diagonal entry.
///
/// The symbolic factorization (fill-reducing ordering, elimination tree,
/// column counts) depends only on this pattern and is computed lazily once,
/// then shared across numeric refactorizations.
#[derive(Debug)]
pub struct SparsityPattern {
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    symbolic: OnceLock<Arc<SparseSymbolic>>,
}

impl SparsityPattern {
    pub fn new(n: usize, col_ptr: Vec<usize>, row_idx: Vec<usize>) -> Result<Self> {
        if col_ptr.len() != n + 1 || col_ptr[0] != 0 || col_ptr[n] != row_idx.len() {
            return Err(Error::dim("malformed column pointers"));
        }
        for c in 0..n {
            let lo = col_ptr[c];
            let hi = col_ptr[c + 1];
            if lo >= hi || row_idx[lo] != c {
                return Err(Error::data(format!("column {c} must start with its diagonal entry")));
            }
            for e in lo..hi {
                if row_idx[e] >= n || (e > lo && row_idx[e] <= row_idx[e - 1]) {
                    return Err(Error::data(format!("rows of column {c} not strictly increasing")));
                }
            }
        }
        Ok(SparsityPattern { n, col_ptr, row_idx, symbolic: OnceLock::new() })
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn nnz_lower(&self) -> usize {
        self.row_idx.len()
    }

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    /// The cached symbolic factorization for this pattern.
    pub fn symbolic(&self) -> &Arc<SparseSymbolic> {
        self.symbolic.get_or_init(|| Arc::new(SparseSymbolic::analyze(self)))
    }
}

/// Sparse symmetric matrix: shared pattern plus the numeric values of the
/// stored lower triangle.
#[derive(Debug, Clone)]
pub struct SparseSymmetricMatrix {
    pattern: Arc<SparsityPattern>,
    values: Vec<f64>,
}

impl SparseSymmetricMatrix {
    pub fn new(pattern: Arc<SparsityPattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz_lower() {
            return Err(Error::dim(format!(
                "pattern has {} entries, got {} values",
                pattern.nnz_lower(),
                values.len()
            )));
        }
        Ok(SparseSymmetricMatrix { pattern, values })
    }

    pub fn order(&self) -> usize {
        self.pattern.order()
    }

    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    pub fn pattern(&self) -> &Arc<SparsityPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> SymmetricMatrix {
        let n = self.order();
        let mut m = DMatrix::zeros(n, n);
        for c in 0..n {
            for e in self.pattern.col_ptr[c]..self.pattern.col_ptr[c + 1] {
                let r = self.pattern.row_idx[e];
                m[(r, c)] = self.values[e];
                m[(c, r)] = self.values[e];
            }
        }
        SymmetricMatrix { m }
    }

    pub(crate) fn diag_mean(&self) -> f64 {
        let n = self.order();
        let mut acc = 0.0;
        for c in 0..n {
            acc += self.values[self.pattern.col_ptr[c]];
        }
        acc / n as f64
    }

    /// Factors using the pattern's cached symbolic analysis.
    pub fn cholesky(&self) -> Result<CholeskyFactor> {
        self.cholesky_with(&Arc::clone(self.pattern.symbolic()))
    }

    /// Factors with an explicitly provided symbolic analysis (useful to
    /// check that symbolic reuse does not change numeric results).
    pub fn cholesky_with(&self, symbolic: &Arc<SparseSymbolic>) -> Result<CholeskyFactor> {
        sparse::factor(self, symbolic).map(CholeskyFactor::Sparse)
    }
}

/// A Cholesky factorization of a symmetric positive definite matrix, dense
/// or sparse (the sparse factor carries its fill-reducing permutation).
/// Immutable after construction and safe to share across threads.
#[derive(Debug, Clone)]
pub enum CholeskyFactor {
    Dense(DenseCholesky),
    Sparse(SparseCholesky),
}

impl CholeskyFactor {
    pub fn order(&self) -> usize {
        match self {
            CholeskyFactor::Dense(f) => f.order(),
            CholeskyFactor::Sparse(f) => f.order(),
        }
    }

    /// log det A = 2 sum_i log L_ii.
    pub fn logdet(&self) -> f64 {
        match self {
            CholeskyFactor::Dense(f) => f.logdet(),
            CholeskyFactor::Sparse(f) => f.logdet(),
        }
    }

    /// Solves A x = b via two triangular solves.
    pub fn solve_vec(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        if b.len() != self.order() {
            return Err(Error::dim(format!(
                "rhs has length {}, matrix order is {}",
                b.len(),
                self.order()
            )));
        }
        Ok(match self {
            CholeskyFactor::Dense(f) => f.solve_vec(b),
            CholeskyFactor::Sparse(f) => f.solve_vec(b),
        })
    }

    /// Solves A X = B column by column.
    pub fn solve_mat(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if b.nrows() != self.order() {
            return Err(Error::dim(format!(
                "rhs has {} rows, matrix order is {}",
                b.nrows(),
                self.order()
            )));
        }
        Ok(match self {
            CholeskyFactor::Dense(f) => f.solve_mat(b),
            CholeskyFactor::Sparse(f) => f.solve_mat(b),
        })
    }

    /// Applies the factor: returns `w` with `Cov(w) = A` when `z` is iid
    /// standard normal (used to sample Gaussian fields).
    pub fn apply_factor(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        if z.len() != self.order() {
            return Err(Error::dim(format!(
                "input has length {}, matrix order is {}",
                z.len(),
                self.order()
            )));
        }
        Ok(match self {
            CholeskyFactor::Dense(f) => f.apply_factor(z),
            CholeskyFactor::Sparse(f) => f.apply_factor(z),
        })
    }

    /// The diagonal jitter that was added to obtain the factorization, if
    /// any.
    pub fn jitter(&self) -> Option<f64> {
        match self {
            CholeskyFactor::Dense(f) => f.jitter(),
            CholeskyFactor::Sparse(f) => f.jitter(),
        }
    }
}
