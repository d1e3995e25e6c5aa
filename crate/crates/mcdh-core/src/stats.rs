//! Small numeric helpers: order-fixed pairwise reduction, quantiles, and
//! correlation. The pairwise tree keeps sums reproducible across worker
//! counts and improves accumulation accuracy on long panels.

use crate::scalar::Scalar;

/// Sums a slice with a fixed pairwise (binary tree) reduction order.
pub fn pairwise_sum<S: Scalar>(values: &[S]) -> S {
    const BASE: usize = 32;
    if values.len() <= BASE {
        let mut s = S::zero();
        for v in values {
            s = s + *v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Linear-interpolation quantile (the common "type 7" convention) of
/// unsorted data. `p` in [0, 1].
pub fn quantile<S: Scalar>(values: &[S], p: f64) -> S {
    assert!(!values.is_empty(), "quantile of empty slice");
    let mut sorted: Vec<S> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in quantile"));
    quantile_sorted(&sorted, p)
}

/// Quantile of already-sorted data.
pub fn quantile_sorted<S: Scalar>(sorted: &[S], p: f64) -> S {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = S::c(h - lo as f64);
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Central interval [lower, upper] holding `mass` of the draws.
pub fn central_interval<S: Scalar>(values: &[S], mass: f64) -> (S, S) {
    let tail = (1.0 - mass) / 2.0;
    let mut sorted: Vec<S> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite value in interval"));
    (quantile_sorted(&sorted, tail), quantile_sorted(&sorted, 1.0 - tail))
}

pub fn mean<S: Scalar>(values: &[S]) -> S {
    pairwise_sum(values) / S::c(values.len() as f64)
}

pub fn variance<S: Scalar>(values: &[S]) -> S {
    let m = mean(values);
    let sq: Vec<S> = values.iter().map(|v| (*v - m) * (*v - m)).collect();
    pairwise_sum(&sq) / S::c((values.len() - 1) as f64)
}

/// Pearson correlation of two equal-length sequences.
pub fn pearson<S: Scalar>(a: &[S], b: &[S]) -> S {
    assert_eq!(a.len(), b.len());
    let ma = mean(a);
    let mb = mean(b);
    let mut cov = S::zero();
    let mut va = S::zero();
    let mut vb = S::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        let dx = *x - ma;
        let dy = *y - mb;
        cov = cov + dx * dy;
        va = va + dx * dx;
        vb = vb + dy * dy;
    }
    let denom = (va * vb).sqrt();
    if denom == S::zero() {
        S::zero()
    } else {
        cov / denom
    }
}

/// Numerically stable log(sum(exp(v))) with max subtraction.
pub fn log_sum_exp<S: Scalar>(values: &[S]) -> S {
    let max = values
        .iter()
        .copied()
        .fold(S::neg_infinity(), |a, b| if b > a { b } else { a });
    if !max.is_finite() {
        return max;
    }
    let mut s = S::zero();
    for v in values {
        s = s + (*v - max).exp();
    }
    max + s.ln()
}
