//! Bijections between unconstrained sampler coordinates and constrained
//! model quantities, with log-Jacobians and reverse-mode adjoints.
//!
//! The correlation-matrix transform maps a vector of K(K-1)/2 unconstrained
//! reals through tanh to canonical partial correlations, then builds the
//! Cholesky factor of a correlation matrix row by row so each row has unit
//! norm. This is the standard transform for sampling LKJ-distributed
//! correlation matrices in unconstrained space.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Number of unconstrained entries for a K x K correlation matrix.
pub fn corr_free_len(k: usize) -> usize {
    k * (k - 1) / 2
}

/// Forward pass of the correlation-Cholesky transform.
///
/// Holds intermediates needed for the log-Jacobian, the LKJ density, and the
/// backward pass: `z = tanh(y)` per strict lower-triangular entry and the
/// remaining squared-norm budget `q` per row position.
#[derive(Debug, Clone)]
pub struct CorrCholesky<S: Scalar> {
    pub dim: usize,
    /// Lower-triangular Cholesky factor of the correlation matrix.
    pub factor: Array2<S>,
    /// tanh of the unconstrained entries, in row-major strict-lower order.
    z: Vec<S>,
    /// q[i][j] = remaining budget before placing entry (i, j); q[i][i] is the
    /// squared diagonal. Stored flattened alongside z rows plus the diagonal.
    q: Vec<Vec<S>>,
}

/// Maps unconstrained `y` (length K(K-1)/2, row-major strict lower order)
/// to the Cholesky factor of a correlation matrix.
pub fn corr_cholesky_constrain<S: Scalar>(y: &[S], k: usize) -> Result<CorrCholesky<S>> {
    if y.len() != corr_free_len(k) {
        return Err(Error::InvalidArgument(format!(
            "correlation transform for dim {k} needs {} entries, got {}",
            corr_free_len(k),
            y.len()
        )));
    }
    let mut factor = Array2::<S>::zeros((k, k));
    let mut z = Vec::with_capacity(y.len());
    let mut q = Vec::with_capacity(k);
    let mut idx = 0;
    for i in 0..k {
        let mut row_q = Vec::with_capacity(i + 1);
        let mut budget = S::one();
        for _j in 0..i {
            let zi = y[idx].tanh();
            z.push(zi);
            row_q.push(budget);
            factor[(i, _j)] = zi * budget.sqrt();
            budget = budget * (S::one() - zi * zi);
            idx += 1;
        }
        row_q.push(budget);
        factor[(i, i)] = budget.sqrt();
        q.push(row_q);
    }
    Ok(CorrCholesky { dim: k, factor, z, q })
}

impl<S: Scalar> CorrCholesky<S> {
    /// Log-Jacobian of the map y -> factor (free entries), i.e. the tanh
    /// derivative plus the sqrt scaling per entry.
    pub fn log_jacobian(&self) -> S {
        let half = S::c(0.5);
        let mut lj = S::zero();
        let mut idx = 0;
        for i in 0..self.dim {
            for j in 0..i {
                let zi = self.z[idx];
                lj = lj + (S::one() - zi * zi).ln() + half * self.q[i][j].ln();
                idx += 1;
            }
        }
        lj
    }

    /// Log-density (up to a constant) of the LKJ distribution with the given
    /// shape, expressed over the Cholesky factor: includes the Jacobian of
    /// factor -> correlation matrix.
    pub fn lkj_cholesky_log_density(&self, shape: S) -> S {
        let k = self.dim;
        let two = S::c(2.0);
        let mut lp = S::zero();
        for i in 1..k {
            // coefficient K - (i+1) + 2*shape - 2 with 1-indexed row i+1
            let coeff = S::c((k - (i + 1)) as f64) + two * shape - two;
            lp = lp + coeff * self.factor[(i, i)].ln();
        }
        lp
    }

    /// Dense correlation matrix `factor * factor^T`.
    pub fn correlation(&self) -> Array2<S> {
        let k = self.dim;
        let mut c = Array2::<S>::zeros((k, k));
        for i in 0..k {
            for j in 0..=i {
                let mut s = S::zero();
                for m in 0..=j.min(i) {
                    s = s + self.factor[(i, m)] * self.factor[(j, m)];
                }
                c[(i, j)] = s;
                c[(j, i)] = s;
            }
        }
        c
    }

    /// Reverse-mode pass. `factor_bar` is the adjoint of the full lower
    /// triangle of `factor` (including the diagonal); `jacobian_weight`
    /// scales the adjoint of `log_jacobian`; `lkj_shape` when present adds
    /// the adjoint of `lkj_cholesky_log_density` with that shape.
    /// Accumulates into `y_bar`.
    pub fn backward(
        &self,
        factor_bar: &Array2<S>,
        jacobian_weight: S,
        lkj_shape: Option<S>,
        y_bar: &mut [S],
    ) {
        let k = self.dim;
        let half = S::c(0.5);
        let two = S::c(2.0);
        let mut idx_end = self.z.len();
        for i in (0..k).rev() {
            let row_z = &self.z[idx_end - i..idx_end];
            let row_q = &self.q[i];
            // adjoint of the diagonal entry L[i][i] = sqrt(q_i)
            let mut g_diag = factor_bar[(i, i)];
            if let Some(shape) = lkj_shape {
                if i >= 1 {
                    let coeff = S::c((k - (i + 1)) as f64) + two * shape - two;
                    g_diag = g_diag + coeff / self.factor[(i, i)];
                }
            }
            // g_q carries the adjoint of q_{j+1} while walking j downward
            let mut g_q = if row_q[i] > S::zero() {
                g_diag * half / row_q[i].sqrt()
            } else {
                S::zero()
            };
            for j in (0..i).rev() {
                let zj = row_z[j];
                let qj = row_q[j];
                let sq = qj.sqrt();
                let mut g_z = factor_bar[(i, j)] * sq - g_q * qj * two * zj;
                let mut g_qj = factor_bar[(i, j)] * zj * half / sq + g_q * (S::one() - zj * zj);
                // log-Jacobian terms log(1 - z^2) + 0.5 log q_j
                g_z = g_z - jacobian_weight * two * zj / (S::one() - zj * zj);
                g_qj = g_qj + jacobian_weight * half / qj;
                let flat = idx_end - i + j;
                y_bar[flat] = y_bar[flat] + g_z * (S::one() - zj * zj);
                g_q = g_qj;
            }
            idx_end -= i;
        }
    }
}

/// Recovers the unconstrained vector from a correlation-Cholesky factor
/// (inverse of [`corr_cholesky_constrain`]).
pub fn corr_cholesky_unconstrain<S: Scalar>(factor: &Array2<S>) -> Result<Vec<S>> {
    let k = factor.nrows();
    let mut y = Vec::with_capacity(corr_free_len(k));
    for i in 0..k {
        let mut budget = S::one();
        for j in 0..i {
            if budget <= S::zero() {
                return Err(Error::NumericalInstability(
                    "correlation factor row has no remaining budget".into(),
                ));
            }
            let z = factor[(i, j)] / budget.sqrt();
            if !(z > -S::one() && z < S::one()) {
                return Err(Error::InvalidArgument(format!(
                    "entry ({i},{j}) is not a valid correlation Cholesky factor"
                )));
            }
            y.push(z.atanh());
            budget = budget * (S::one() - z * z);
        }
    }
    Ok(y)
}

/// Cholesky factor of a correlation matrix (for unconstraining an externally
/// supplied correlation matrix).
pub fn correlation_cholesky<S: Scalar>(corr: &Array2<S>) -> Result<Array2<S>> {
    let k = corr.nrows();
    for i in 0..k {
        if (corr[(i, i)] - S::one()).abs() > S::c(1e-8) {
            return Err(Error::InvalidArgument(format!(
                "correlation matrix diagonal entry {i} is not 1"
            )));
        }
        for j in 0..i {
            if (corr[(i, j)] - corr[(j, i)]).abs() > S::c(1e-8) {
                return Err(Error::InvalidArgument(
                    "correlation matrix is not symmetric".into(),
                ));
            }
        }
    }
    crate::linalg::cholesky(corr)
}
