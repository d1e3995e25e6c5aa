//! Squared-exponential kernel evaluation, covariance assembly, and
//! stabilized Cholesky factorization shared by every GP in the system.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Scalar;

/// Relative jitter ladder: start at `JITTER_START * amplitude^2` and escalate
/// by `JITTER_STEP` until `JITTER_MAX * amplitude^2` before giving up.
pub const JITTER_START: f64 = 1e-8;
pub const JITTER_STEP: f64 = 10.0;
pub const JITTER_MAX: f64 = 1e-4;

/// Ordered real time coordinates (quarter indices mapped to reals).
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid<S: Scalar> {
    points: Vec<S>,
}

impl<S: Scalar> TimeGrid<S> {
    /// Builds a grid, validating that points are finite and strictly increasing.
    pub fn new(points: Vec<S>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidArgument("time grid must be nonempty".into()));
        }
        for (i, p) in points.iter().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "time grid point {i} is not finite"
                )));
            }
            if i > 0 && !(points[i - 1] < *p) {
                return Err(Error::InvalidArgument(format!(
                    "time grid must be strictly increasing at index {i}"
                )));
            }
        }
        Ok(Self { points })
    }

    /// Consecutive integer buckets 0..n mapped to reals.
    pub fn integer_buckets(n: usize) -> Result<Self> {
        Self::new((0..n).map(|t| S::c(t as f64)).collect())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[S] {
        &self.points
    }
}

/// Squared-exponential kernel hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SEKernelParams<S: Scalar> {
    pub amplitude: S,
    pub length_scale: S,
}

impl<S: Scalar> SEKernelParams<S> {
    pub fn new(amplitude: S, length_scale: S) -> Result<Self> {
        if !(amplitude > S::zero()) || !amplitude.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kernel amplitude must be positive and finite, got {amplitude}"
            )));
        }
        if !(length_scale > S::zero()) || !length_scale.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "kernel length-scale must be positive and finite, got {length_scale}"
            )));
        }
        Ok(Self {
            amplitude,
            length_scale,
        })
    }
}

/// Dense symmetric covariance matrix with the jitter that was added to its
/// diagonal to make the Cholesky factorization succeed.
#[derive(Debug, Clone)]
pub struct CovarianceMatrix<S: Scalar> {
    pub entries: Array2<S>,
    pub jitter_applied: S,
}

impl<S: Scalar> CovarianceMatrix<S> {
    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }
}

/// Squared-exponential kernel: `amplitude^2 * exp(-(t - t2)^2 / (2 rho^2))`.
pub fn se_kernel<S: Scalar>(t: S, t2: S, params: &SEKernelParams<S>) -> Result<S> {
    if !t.is_finite() || !t2.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "kernel inputs must be finite, got ({t}, {t2})"
        )));
    }
    let d = t - t2;
    let rho = params.length_scale;
    let half = S::c(0.5);
    Ok(params.amplitude * params.amplitude * (-half * d * d / (rho * rho)).exp())
}

/// Evaluates the kernel pairwise on a grid and adds `jitter` to the diagonal.
/// No factorization is attempted; see [`build_covariance`] for the stabilized
/// construction.
pub fn covariance_entries<S: Scalar>(
    grid: &TimeGrid<S>,
    params: &SEKernelParams<S>,
    jitter: S,
) -> Result<Array2<S>> {
    let n = grid.len();
    let pts = grid.points();
    let mut k = Array2::<S>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v = se_kernel(pts[i], pts[j], params)?;
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
        k[(i, i)] = k[(i, i)] + jitter;
    }
    Ok(k)
}

/// Builds the covariance matrix for `grid`, escalating the diagonal jitter
/// through the ladder until a Cholesky factorization succeeds.
///
/// `jitter` is the starting value; when zero is requested the matrix must be
/// factorizable as-is (no escalation), which is the behavior wanted by exact
/// closed-form tests.
pub fn build_covariance<S: Scalar>(
    grid: &TimeGrid<S>,
    params: &SEKernelParams<S>,
    jitter: S,
) -> Result<CovarianceMatrix<S>> {
    if !(jitter >= S::zero()) {
        return Err(Error::InvalidArgument(format!(
            "jitter must be nonnegative, got {jitter}"
        )));
    }
    let entries = covariance_entries(grid, params, jitter)?;
    if linalg::cholesky(&entries).is_ok() {
        return Ok(CovarianceMatrix {
            entries,
            jitter_applied: jitter,
        });
    }
    if jitter == S::zero() {
        return Err(Error::NumericalInstability(format!(
            "covariance on grid of length {} (amplitude {}, length-scale {}) \
             is not positive definite with zero jitter",
            grid.len(),
            params.amplitude,
            params.length_scale
        )));
    }
    let amp2 = params.amplitude * params.amplitude;
    let max_jitter = S::c(JITTER_MAX) * amp2;
    let mut j = jitter * S::c(JITTER_STEP);
    while j <= max_jitter {
        let entries = covariance_entries(grid, params, j)?;
        if linalg::cholesky(&entries).is_ok() {
            return Ok(CovarianceMatrix {
                entries,
                jitter_applied: j,
            });
        }
        j = j * S::c(JITTER_STEP);
    }
    Err(Error::NumericalInstability(format!(
        "covariance on grid of length {} (amplitude {}, length-scale {}) \
         failed Cholesky even at max jitter {}",
        grid.len(),
        params.amplitude,
        params.length_scale,
        max_jitter
    )))
}

/// Default starting jitter for the given amplitude.
pub fn default_jitter<S: Scalar>(amplitude: S) -> S {
    S::c(JITTER_START) * amplitude * amplitude
}

/// Covariance built with the default jitter ladder.
pub fn build_covariance_default<S: Scalar>(
    grid: &TimeGrid<S>,
    params: &SEKernelParams<S>,
) -> Result<CovarianceMatrix<S>> {
    build_covariance(grid, params, default_jitter(params.amplitude))
}

/// Lower-triangular Cholesky factor of a covariance matrix.
pub fn cholesky_lower<S: Scalar>(m: &CovarianceMatrix<S>) -> Result<Array2<S>> {
    linalg::cholesky(&m.entries)
}
