//! Sparse Cholesky via up-looking LDL^T with an elimination-tree symbolic
//! phase.
//!
//! The symbolic analysis (fill-reducing permutation, permuted pattern,
//! elimination tree, column counts of the factor) depends only on the
//! sparsity pattern and is reused across numeric refactorizations; the
//! numeric phase fills a fresh factor for each value vector. The factor is
//! stored in LDL form with a unit lower triangle; since only positive
//! definite matrices are accepted (D > 0), it is equivalent to the Cholesky
//! factor `L sqrt(D)`.

use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

use super::{min_degree_order, SparseSymmetricMatrix, SparsityPattern, JITTER_LADDER};
use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// Pattern-level analysis shared by all numeric factorizations of matrices
/// with the same sparsity structure.
#[derive(Debug)]
pub struct SparseSymbolic {
    n: usize,
    /// perm[k] = original index of the k-th pivot.
    perm: Vec<usize>,
    /// Permuted upper-triangular CSC pattern (diagonal included).
    up_col_ptr: Vec<usize>,
    up_row_idx: Vec<usize>,
    /// Input lower-CSC entry index -> slot in the permuted upper arrays.
    scatter_map: Vec<usize>,
    /// Elimination tree of the permuted pattern (NONE for roots).
    parent: Vec<usize>,
    /// Column pointers of the strictly-lower factor L.
    l_col_ptr: Vec<usize>,
}

impl SparseSymbolic {
    /// Runs ordering, permutation, elimination tree, and column counts for a
    /// pattern.
    pub fn analyze(pattern: &SparsityPattern) -> SparseSymbolic {
        let n = pattern.order();
        let col_ptr = pattern.col_ptr();
        let row_idx = pattern.row_idx();
        let nnz = pattern.nnz_lower();

        let perm = min_degree_order(pattern);
        let mut iperm = vec![0usize; n];
        for (k, &orig) in perm.iter().enumerate() {
            iperm[orig] = k;
        }

        // Permuted upper CSC: input entry (r, c) lands at
        // (min(pr, pc), max(pr, pc)) with pr = iperm[r], pc = iperm[c].
        let mut counts = vec![0usize; n];
        for c in 0..n {
            for e in col_ptr[c]..col_ptr[c + 1] {
                let pr = iperm[row_idx[e]];
                let pc = iperm[c];
                counts[pr.max(pc)] += 1;
            }
        }
        let mut up_col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            up_col_ptr[k + 1] = up_col_ptr[k] + counts[k];
        }
        let mut next = up_col_ptr[..n].to_vec();
        let mut up_row_idx = vec![0usize; nnz];
        let mut scatter_map = vec![0usize; nnz];
        for c in 0..n {
            for e in col_ptr[c]..col_ptr[c + 1] {
                let pr = iperm[row_idx[e]];
                let pc = iperm[c];
                let (i, j) = (pr.min(pc), pr.max(pc));
                let slot = next[j];
                next[j] += 1;
                up_row_idx[slot] = i;
                scatter_map[e] = slot;
            }
        }

        // Elimination tree and factor column counts (Liu's algorithm with
        // path marking).
        let mut parent = vec![NONE; n];
        let mut l_nz = vec![0usize; n];
        let mut mark = vec![NONE; n];
        for k in 0..n {
            mark[k] = k;
            for e in up_col_ptr[k]..up_col_ptr[k + 1] {
                let mut i = up_row_idx[e];
                while i != k && mark[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    l_nz[i] += 1;
                    mark[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut l_col_ptr = vec![0usize; n + 1];
        for k in 0..n {
            l_col_ptr[k + 1] = l_col_ptr[k] + l_nz[k];
        }

        SparseSymbolic { n, perm, up_col_ptr, up_row_idx, scatter_map, parent, l_col_ptr }
    }

    pub fn order(&self) -> usize {
        self.n
    }

    pub fn permutation(&self) -> &[usize] {
        &self.perm
    }

    /// Entries in the strictly-lower factor (fill included).
    pub fn factor_nnz(&self) -> usize {
        self.l_col_ptr[self.n]
    }
}

/// Numeric sparse factor: unit-lower L, positive diagonal D, and the
/// symbolic data it was built with.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    symbolic: Arc<SparseSymbolic>,
    l_row_idx: Vec<usize>,
    l_values: Vec<f64>,
    diag: Vec<f64>,
    logdet: f64,
    jitter: Option<f64>,
}

pub(super) fn factor(
    a: &SparseSymmetricMatrix,
    symbolic: &Arc<SparseSymbolic>,
) -> Result<SparseCholesky> {
    let n = a.order();
    if symbolic.n != n {
        return Err(Error::dim(format!(
            "symbolic analysis is for order {}, matrix has order {n}",
            symbolic.n
        )));
    }
    let mean_diag = a.diag_mean();
    for attempt in 0..=JITTER_LADDER.len() {
        let (eps, bump) = if attempt == 0 {
            (None, 0.0)
        } else {
            let eps = JITTER_LADDER[attempt - 1];
            (Some(eps), eps * mean_diag)
        };
        if let Some((l_row_idx, l_values, diag)) = numeric(a, symbolic, bump) {
            let logdet: f64 = diag.iter().map(|d| d.ln()).sum();
            if logdet.is_finite() {
                return Ok(SparseCholesky {
                    symbolic: Arc::clone(symbolic),
                    l_row_idx,
                    l_values,
                    diag,
                    logdet,
                    jitter: eps,
                });
            }
        }
    }
    Err(Error::NotPositiveDefinite { order: n, max_epsilon: *JITTER_LADDER.last().unwrap() })
}

/// Up-looking LDL^T of the permuted matrix; returns None when a pivot is
/// not strictly positive (matrix not positive definite under this jitter).
fn numeric(
    a: &SparseSymmetricMatrix,
    symb: &SparseSymbolic,
    diag_bump: f64,
) -> Option<(Vec<usize>, Vec<f64>, Vec<f64>)> {
    let n = symb.n;
    let pattern = a.pattern();
    let in_col_ptr = pattern.col_ptr();
    let in_row_idx = pattern.row_idx();
    let values = a.values();

    // scatter input values into the permuted upper layout
    let mut ax = vec![0.0; values.len()];
    for c in 0..n {
        for e in in_col_ptr[c]..in_col_ptr[c + 1] {
            let mut v = values[e];
            if in_row_idx[e] == c {
                v += diag_bump;
            }
            ax[symb.scatter_map[e]] = v;
        }
    }

    let l_nnz = symb.factor_nnz();
    let mut l_row_idx = vec![0usize; l_nnz];
    let mut l_values = vec![0.0; l_nnz];
    let mut l_next = symb.l_col_ptr[..n].to_vec();
    let mut diag = vec![0.0; n];

    let mut y = vec![0.0; n];
    let mut marked = vec![false; n];
    let mut stack = vec![0usize; n];
    let mut path = vec![0usize; n];

    for k in 0..n {
        // gather the sparse right-hand side (column k of the permuted upper
        // triangle) and the reach of its pattern in the elimination tree
        let mut top = 0usize;
        for e in symb.up_col_ptr[k]..symb.up_col_ptr[k + 1] {
            let i = symb.up_row_idx[e];
            if i == k {
                diag[k] = ax[e];
                continue;
            }
            y[i] = ax[e];
            if marked[i] {
                continue;
            }
            marked[i] = true;
            path[0] = i;
            let mut len = 1usize;
            let mut node = symb.parent[i];
            while node != NONE && node < k && !marked[node] {
                marked[node] = true;
                path[len] = node;
                len += 1;
                node = symb.parent[node];
            }
            while len > 0 {
                len -= 1;
                stack[top] = path[len];
                top += 1;
            }
        }

        // triangular solve over the reach, in topological order
        while top > 0 {
            top -= 1;
            let j = stack[top];
            let yj = y[j];
            y[j] = 0.0;
            marked[j] = false;
            let start = symb.l_col_ptr[j];
            let end = l_next[j];
            for e in start..end {
                y[l_row_idx[e]] -= l_values[e] * yj;
            }
            let lkj = yj / diag[j];
            diag[k] -= yj * lkj;
            l_row_idx[end] = k;
            l_values[end] = lkj;
            l_next[j] = end + 1;
        }

        if !(diag[k] > 0.0) || !diag[k].is_finite() {
            return None;
        }
    }
    Some((l_row_idx, l_values, diag))
}

impl SparseCholesky {
    pub fn order(&self) -> usize {
        self.symbolic.n
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn jitter(&self) -> Option<f64> {
        self.jitter
    }

    pub fn symbolic(&self) -> &Arc<SparseSymbolic> {
        &self.symbolic
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.order();
        let mut w = vec![0.0; n];
        for k in 0..n {
            w[k] = b[self.symbolic.perm[k]];
        }
        self.solve_permuted_in_place(&mut w);
        let mut x = DVector::zeros(n);
        for k in 0..n {
            x[self.symbolic.perm[k]] = w[k];
        }
        x
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let n = self.order();
        let mut out = DMatrix::zeros(n, b.ncols());
        let mut w = vec![0.0; n];
        for col in 0..b.ncols() {
            for k in 0..n {
                w[k] = b[(self.symbolic.perm[k], col)];
            }
            self.solve_permuted_in_place(&mut w);
            for k in 0..n {
                out[(self.symbolic.perm[k], col)] = w[k];
            }
        }
        out
    }

    /// (L + I) w; then D; then (L + I)^T -- the permuted system.
    fn solve_permuted_in_place(&self, w: &mut [f64]) {
        let n = self.order();
        let lp = &self.symbolic.l_col_ptr;
        for j in 0..n {
            let wj = w[j];
            if wj != 0.0 {
                for e in lp[j]..lp[j + 1] {
                    w[self.l_row_idx[e]] -= self.l_values[e] * wj;
                }
            }
        }
        for j in 0..n {
            w[j] /= self.diag[j];
        }
        for j in (0..n).rev() {
            let mut acc = w[j];
            for e in lp[j]..lp[j + 1] {
                acc -= self.l_values[e] * w[self.l_row_idx[e]];
            }
            w[j] = acc;
        }
    }

    /// Returns `w` with `Cov(w) = A` for iid standard normal `z`, using
    /// `A = (P^T L sqrt(D)) (P^T L sqrt(D))^T`.
    pub fn apply_factor(&self, z: &DVector<f64>) -> DVector<f64> {
        let n = self.order();
        let lp = &self.symbolic.l_col_ptr;
        let mut w = vec![0.0; n];
        for j in 0..n {
            let s = self.diag[j].sqrt() * z[j];
            w[j] += s;
            for e in lp[j]..lp[j + 1] {
                w[self.l_row_idx[e]] += self.l_values[e] * s;
            }
        }
        let mut x = DVector::zeros(n);
        for k in 0..n {
            x[self.symbolic.perm[k]] = w[k];
        }
        x
    }

    /// Dense Cholesky factor of the permuted matrix, `L sqrt(D)` (tests).
    pub fn llt_dense(&self) -> DMatrix<f64> {
        let n = self.order();
        let lp = &self.symbolic.l_col_ptr;
        let mut l = DMatrix::zeros(n, n);
        for j in 0..n {
            let s = self.diag[j].sqrt();
            l[(j, j)] = s;
            for e in lp[j]..lp[j + 1] {
                l[(self.l_row_idx[e], j)] = self.l_values[e] * s;
            }
        }
        l
    }

    pub fn permutation(&self) -> &[usize] {
        self.symbolic.permutation()
    }
}
