//! Dense symmetric linear algebra used by the GP machinery: Cholesky
//! factorization, triangular solves, and the reverse-mode adjoint of the
//! Cholesky map. Matrices here are small (time grids and coefficient
//! blocks), so everything is plain O(n^3) dense code.

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// Returns an error naming the failing pivot when the matrix is not
/// numerically positive definite.
pub fn cholesky<S: Scalar>(a: &Array2<S>) -> Result<Array2<S>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::InvalidArgument(format!(
            "cholesky requires a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    let mut l = Array2::<S>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[(j, j)];
        for k in 0..j {
            diag = diag - l[(j, k)] * l[(j, k)];
        }
        if !(diag > S::zero()) || !diag.is_finite() {
            return Err(Error::NumericalInstability(format!(
                "cholesky pivot {j} is non-positive ({diag})"
            )));
        }
        let root = diag.sqrt();
        l[(j, j)] = root;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s = s - l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / root;
        }
    }
    Ok(l)
}

/// Solve `L x = b` for lower-triangular `L` (forward substitution).
pub fn solve_lower<S: Scalar>(l: &Array2<S>, b: &Array1<S>) -> Array1<S> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s = s - l[(i, k)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// Solve `L^T x = b` for lower-triangular `L` (back substitution).
pub fn solve_lower_transpose<S: Scalar>(l: &Array2<S>, b: &Array1<S>) -> Array1<S> {
    let n = l.nrows();
    let mut x = b.clone();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s = s - l[(k, i)] * x[k];
        }
        x[i] = s / l[(i, i)];
    }
    x
}

/// `y = L v` for lower-triangular `L`.
pub fn lower_matvec<S: Scalar>(l: &Array2<S>, v: &[S]) -> Array1<S> {
    let n = l.nrows();
    let mut y = Array1::<S>::zeros(n);
    for i in 0..n {
        let mut s = S::zero();
        for k in 0..=i {
            s = s + l[(i, k)] * v[k];
        }
        y[i] = s;
    }
    y
}

/// `y = L^T v` for lower-triangular `L`.
pub fn lower_transpose_matvec<S: Scalar>(l: &Array2<S>, v: &[S]) -> Array1<S> {
    let n = l.nrows();
    let mut y = Array1::<S>::zeros(n);
    for i in 0..n {
        let li = l[(i, i)] * v[i];
        y[i] = y[i] + li;
        for k in (i + 1)..n {
            y[i] = y[i] + l[(k, i)] * v[k];
        }
    }
    y
}

/// Reverse-mode adjoint of the Cholesky factorization.
///
/// Given `L = chol(A)` and the adjoint `l_bar = dF/dL` of some scalar F,
/// returns `a_bar = dF/dA` such that `<a_bar, dA> = <l_bar, dL>` for
/// symmetric perturbations `dA`. Uses the identity
/// `a_bar = L^-T Phi(L^T l_bar) L^-1` where `Phi` takes the lower triangle
/// with the diagonal halved.
pub fn cholesky_adjoint<S: Scalar>(l: &Array2<S>, l_bar: &Array2<S>) -> Array2<S> {
    let n = l.nrows();
    let half = S::c(0.5);

    // P = Phi(L^T l_bar)
    let mut p = Array2::<S>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = S::zero();
            // (L^T l_bar)[i][j] = sum_k L[k][i] * l_bar[k][j]
            for k in i.max(j)..n {
                s = s + l[(k, i)] * l_bar[(k, j)];
            }
            p[(i, j)] = if i == j { half * s } else { s };
        }
    }

    // Y = L^-T P  (solve L^T Y = P column by column)
    let mut y = Array2::<S>::zeros((n, n));
    for j in 0..n {
        let col = p.column(j).to_owned();
        let sol = solve_lower_transpose(l, &col);
        for i in 0..n {
            y[(i, j)] = sol[i];
        }
    }

    // a_bar = Y L^-1  (solve a_bar L = Y, i.e. L^T a_bar^T = Y^T row-wise)
    let mut a_bar = Array2::<S>::zeros((n, n));
    for i in 0..n {
        let row = y.row(i).to_owned();
        let sol = solve_lower_transpose(l, &row);
        for j in 0..n {
            a_bar[(i, j)] = sol[j];
        }
    }
    a_bar
}

/// Log-determinant of a PD matrix from its Cholesky factor.
pub fn log_det_from_cholesky<S: Scalar>(l: &Array2<S>) -> S {
    let two = S::c(2.0);
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<S>() * two
}
