//! Dense Cholesky with the diagonal jitter retry policy.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{SymmetricMatrix, JITTER_LADDER};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct DenseCholesky {
    chol: Cholesky<f64, Dyn>,
    logdet: f64,
    jitter: Option<f64>,
}

pub(super) fn factor(a: &SymmetricMatrix) -> Result<DenseCholesky> {
    let n = a.order();
    let mean_diag = a.diag_mean();
    let mut eps_used = None;
    for attempt in 0..=JITTER_LADDER.len() {
        let mut m = a.as_dmatrix().clone();
        if attempt > 0 {
            let eps = JITTER_LADDER[attempt - 1];
            let bump = eps * mean_diag;
            for i in 0..n {
                m[(i, i)] += bump;
            }
            eps_used = Some(eps);
        }
        if let Some(chol) = Cholesky::new(m) {
            let logdet = 2.0 * chol.l_dirty().diagonal().map(f64::ln).sum();
            if logdet.is_finite() {
                return Ok(DenseCholesky { chol, logdet, jitter: eps_used });
            }
        }
    }
    Err(Error::NotPositiveDefinite { order: n, max_epsilon: *JITTER_LADDER.last().unwrap() })
}

impl DenseCholesky {
    pub fn order(&self) -> usize {
        self.chol.l_dirty().nrows()
    }

    pub fn logdet(&self) -> f64 {
        self.logdet
    }

    pub fn jitter(&self) -> Option<f64> {
        self.jitter
    }

    pub fn solve_vec(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_mat(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    /// L z.
    pub fn apply_factor(&self, z: &DVector<f64>) -> DVector<f64> {
        let l = self.chol.l_dirty();
        let n = l.nrows();
        let mut out = DVector::zeros(n);
        for j in 0..n {
            let zj = z[j];
            for i in j..n {
                out[i] += l[(i, j)] * zj;
            }
        }
        out
    }

    /// The lower factor (owned copy), mainly for tests.
    pub fn l(&self) -> DMatrix<f64> {
        self.chol.l()
    }
}
