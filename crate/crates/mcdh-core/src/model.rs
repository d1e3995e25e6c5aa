//! Generative structure of the choice model: shared latent GP factors,
//! hierarchical individual weights, and assembly of each individual's
//! time-varying sensitivity vector.

use ndarray::{Array1, Array2, Array3};

use crate::error::{Error, Result};
use crate::kernels::{self, SEKernelParams, TimeGrid};
use crate::linalg;
use crate::scalar::Scalar;

/// Problem dimensions plus the fixed coefficient index map.
///
/// Coefficients are laid out category-major: category `c` owns the contiguous
/// block `offset(c) .. offset(c) + coeffs_per_category[c]`, ordered as the
/// `J_c - 1` non-baseline brand dummies (ascending brand index) followed by
/// the marketing-mix slopes (price last). `K` is the total across categories.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ModelDims {
    pub individuals: usize,
    pub categories: usize,
    pub brands_per_category: Vec<usize>,
    pub coeffs_per_category: Vec<usize>,
    pub factors: usize,
    pub time_buckets: usize,
}

impl ModelDims {
    pub fn new(
        individuals: usize,
        brands_per_category: Vec<usize>,
        coeffs_per_category: Vec<usize>,
        factors: usize,
        time_buckets: usize,
    ) -> Result<Self> {
        let categories = brands_per_category.len();
        if categories == 0 || individuals == 0 || time_buckets == 0 {
            return Err(Error::InvalidArgument(
                "dimensions must all be at least 1".into(),
            ));
        }
        if coeffs_per_category.len() != categories {
            return Err(Error::InvalidArgument(
                "coeffs_per_category length must match brands_per_category".into(),
            ));
        }
        for (c, (&j, &p)) in brands_per_category
            .iter()
            .zip(coeffs_per_category.iter())
            .enumerate()
        {
            if j < 2 {
                return Err(Error::InvalidArgument(format!(
                    "category {c} needs at least 2 brands"
                )));
            }
            if p < j {
                // J-1 dummies plus at least the price slope
                return Err(Error::InvalidArgument(format!(
                    "category {c} needs at least {} coefficients, got {p}",
                    j
                )));
            }
        }
        Ok(Self {
            individuals,
            categories,
            brands_per_category,
            coeffs_per_category,
            factors,
            time_buckets,
        })
    }

    /// Usual layout: `J_c - 1` brand dummies plus one price slope.
    pub fn with_price_only(
        individuals: usize,
        brands_per_category: Vec<usize>,
        factors: usize,
        time_buckets: usize,
    ) -> Result<Self> {
        let coeffs = brands_per_category.iter().map(|&j| j).collect();
        Self::new(individuals, brands_per_category, coeffs, factors, time_buckets)
    }

    /// Total coefficient count K.
    pub fn total_coeffs(&self) -> usize {
        self.coeffs_per_category.iter().sum()
    }

    /// First coefficient index of category `c`.
    pub fn coeff_offset(&self, c: usize) -> usize {
        self.coeffs_per_category[..c].iter().sum()
    }

    /// Global coefficient index for (category, within-category coefficient).
    pub fn coeff_index(&self, category: usize, p: usize) -> usize {
        debug_assert!(p < self.coeffs_per_category[category]);
        self.coeff_offset(category) + p
    }

    /// Global index of the price slope of category `c` (last in the block).
    pub fn price_index(&self, c: usize) -> usize {
        self.coeff_offset(c) + self.coeffs_per_category[c] - 1
    }

    /// Category owning global coefficient index `k`.
    pub fn category_of_coeff(&self, k: usize) -> usize {
        let mut off = 0;
        for (c, &p) in self.coeffs_per_category.iter().enumerate() {
            if k < off + p {
                return c;
            }
            off += p;
        }
        panic!("coefficient index {k} out of range");
    }
}

/// Shared latent GP factors in non-centered form: standard-normal innovations
/// mapped through the Cholesky factor of a unit-amplitude SE covariance.
#[derive(Debug, Clone)]
pub struct LatentFactorSet<S: Scalar> {
    /// L x T standard-normal innovations.
    pub innovations: Array2<S>,
    /// Per-factor length-scales.
    pub length_scales: Vec<S>,
    /// L x T realized factor values on the grid.
    pub realized: Array2<S>,
}

impl<S: Scalar> LatentFactorSet<S> {
    pub fn factor_count(&self) -> usize {
        self.realized.nrows()
    }
}

/// Realizes the latent factors: `realized_l = chol(K(sigma=1, rho_l)) z_l`.
///
/// Deterministic in its inputs; when the innovations are iid standard normal
/// each realized factor has the unit-amplitude SE GP distribution.
pub fn realize_factors<S: Scalar>(
    innovations: &Array2<S>,
    length_scales: &[S],
    grid: &TimeGrid<S>,
) -> Result<LatentFactorSet<S>> {
    let factors = innovations.nrows();
    let t = innovations.ncols();
    if length_scales.len() != factors {
        return Err(Error::InvalidArgument(format!(
            "{} innovation rows but {} length-scales",
            factors,
            length_scales.len()
        )));
    }
    if t != grid.len() {
        return Err(Error::InvalidArgument(format!(
            "innovation length {t} does not match grid length {}",
            grid.len()
        )));
    }
    let mut realized = Array2::<S>::zeros((factors, t));
    for l in 0..factors {
        let params = SEKernelParams::new(S::one(), length_scales[l])?;
        let cov = kernels::build_covariance_default(grid, &params)?;
        let chol = kernels::cholesky_lower(&cov)?;
        let z: Vec<S> = innovations.row(l).to_vec();
        let u = linalg::lower_matvec(&chol, &z);
        for ti in 0..t {
            realized[(l, ti)] = u[ti];
        }
    }
    Ok(LatentFactorSet {
        innovations: innovations.clone(),
        length_scales: length_scales.to_vec(),
        realized,
    })
}

/// Individual-by-coefficient-by-factor loading weights.
#[derive(Debug, Clone)]
pub struct WeightTensor<S: Scalar> {
    /// I x K x L.
    pub omega: Array3<S>,
}

/// Population means of the coefficients.
#[derive(Debug, Clone)]
pub struct PopulationMeans<S: Scalar> {
    pub alpha: Array1<S>,
}

/// Scale and correlation structure of the weight rows.
#[derive(Debug, Clone)]
pub struct HeterogeneityScale<S: Scalar> {
    pub tau: Array1<S>,
    pub corr: Array2<S>,
    pub sigma_omega: Array2<S>,
}

impl<S: Scalar> HeterogeneityScale<S> {
    pub fn new(tau: Array1<S>, corr: Array2<S>) -> Result<Self> {
        let sigma_omega = compose_sigma_omega(&tau, &corr)?;
        Ok(Self { tau, corr, sigma_omega })
    }
}

/// `diag(tau) * corr * diag(tau)`.
pub fn compose_sigma_omega<S: Scalar>(tau: &Array1<S>, corr: &Array2<S>) -> Result<Array2<S>> {
    let k = tau.len();
    if corr.nrows() != k || corr.ncols() != k {
        return Err(Error::InvalidArgument(format!(
            "correlation matrix is {}x{} but tau has length {k}",
            corr.nrows(),
            corr.ncols()
        )));
    }
    for (i, t) in tau.iter().enumerate() {
        if !(*t > S::zero()) || !t.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "tau[{i}] must be positive and finite, got {t}"
            )));
        }
    }
    let mut out = Array2::<S>::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            out[(i, j)] = tau[i] * corr[(i, j)] * tau[j];
        }
    }
    // PD whenever corr is a valid correlation matrix; surface failures early.
    linalg::cholesky(&out)?;
    Ok(out)
}

/// One individual's one coefficient evaluated on the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityPath<S: Scalar> {
    pub values: Vec<S>,
}

/// `beta_ik(t) = alpha_k + sum_l omega[i,k,l] * u_l(t)`.
pub fn assemble_sensitivity<S: Scalar>(
    individual: usize,
    coeff: usize,
    alpha: &PopulationMeans<S>,
    omega: &WeightTensor<S>,
    factors: &LatentFactorSet<S>,
) -> Result<SensitivityPath<S>> {
    let (n_i, n_k, n_l) = omega.omega.dim();
    if individual >= n_i || coeff >= n_k {
        return Err(Error::InvalidArgument(format!(
            "index ({individual},{coeff}) out of range for {n_i}x{n_k} weights"
        )));
    }
    if n_l != factors.factor_count() {
        return Err(Error::InvalidArgument(format!(
            "weights carry {n_l} factors but the factor set has {}",
            factors.factor_count()
        )));
    }
    let t = factors.realized.ncols();
    let a = alpha.alpha[coeff];
    let mut values = Vec::with_capacity(t);
    for ti in 0..t {
        let mut v = a;
        for l in 0..n_l {
            v = v + omega.omega[(individual, coeff, l)] * factors.realized[(l, ti)];
        }
        values.push(v);
    }
    Ok(SensitivityPath { values })
}

/// Dense container of every (individual, coefficient) path: I x K x T.
pub fn assemble_all_sensitivities<S: Scalar>(
    alpha: &PopulationMeans<S>,
    omega: &WeightTensor<S>,
    factors: &LatentFactorSet<S>,
) -> Array3<S> {
    let (n_i, n_k, n_l) = omega.omega.dim();
    let t = factors.realized.ncols();
    let mut beta = Array3::<S>::zeros((n_i, n_k, t));
    for i in 0..n_i {
        for k in 0..n_k {
            let a = alpha.alpha[k];
            for ti in 0..t {
                let mut v = a;
                for l in 0..n_l {
                    v = v + omega.omega[(i, k, l)] * factors.realized[(l, ti)];
                }
                beta[(i, k, ti)] = v;
            }
        }
    }
    beta
}

/// Unnormalized LKJ log density over a correlation matrix:
/// `(shape - 1) * log det(corr)`.
pub fn lkj_log_density_unnormalized<S: Scalar>(corr: &Array2<S>, shape: S) -> Result<S> {
    if !(shape > S::zero()) {
        return Err(Error::InvalidArgument(format!(
            "LKJ shape must be positive, got {shape}"
        )));
    }
    let chol = crate::transforms::correlation_cholesky(corr)?;
    Ok((shape - S::one()) * linalg::log_det_from_cholesky(&chol))
}

/// Half-normal log density (including normalization) for x > 0.
pub fn half_normal_log_density<S: Scalar>(x: S, scale: S) -> Result<S> {
    if !(x > S::zero()) {
        return Err(Error::InvalidArgument(format!(
            "half-normal support is x > 0, got {x}"
        )));
    }
    if !(scale > S::zero()) {
        return Err(Error::InvalidArgument(format!(
            "half-normal scale must be positive, got {scale}"
        )));
    }
    let two = S::c(2.0);
    let pi = S::c(std::f64::consts::PI);
    Ok((two / pi).sqrt().ln() - scale.ln() - x * x / (two * scale * scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn dims_2cat() -> ModelDims {
        ModelDims::with_price_only(3, vec![3, 4], 2, 5).unwrap()
    }

    #[test]
    fn coefficient_index_map_is_contiguous() {
        let d = dims_2cat();
        assert_eq!(d.total_coeffs(), 3 + 4);
        assert_eq!(d.coeff_offset(0), 0);
        assert_eq!(d.coeff_offset(1), 3);
        assert_eq!(d.coeff_index(1, 2), 5);
        assert_eq!(d.price_index(0), 2);
        assert_eq!(d.price_index(1), 6);
        assert_eq!(d.category_of_coeff(2), 0);
        assert_eq!(d.category_of_coeff(3), 1);
    }

    #[test]
    fn zero_innovations_realize_to_zero() {
        let grid = TimeGrid::integer_buckets(6).unwrap();
        let z = Array2::<f64>::zeros((2, 6));
        let f = realize_factors(&z, &[1.0, 3.0], &grid).unwrap();
        assert!(f.realized.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn single_point_realization_scales_by_sqrt_jitter() {
        let grid = TimeGrid::new(vec![0.0]).unwrap();
        let z = array![[1.7f64]];
        let f = realize_factors(&z, &[2.0], &grid).unwrap();
        let want = (1.0f64 + kernels::JITTER_START).sqrt() * 1.7;
        assert!((f.realized[(0, 0)] - want).abs() < 1e-12);
    }

    #[test]
    fn monte_carlo_realized_covariance_matches_kernel() {
        let grid = TimeGrid::integer_buckets(5).unwrap();
        let params = SEKernelParams::new(1.0f64, 2.0).unwrap();
        let want = kernels::build_covariance_default(&grid, &params).unwrap().entries;
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 10_000;
        let mut acc = Array2::<f64>::zeros((5, 5));
        for _ in 0..n {
            let z: Vec<f64> = (0..5).map(|_| StandardNormal.sample(&mut rng)).collect();
            let z = Array2::from_shape_vec((1, 5), z).unwrap();
            let f = realize_factors(&z, &[2.0], &grid).unwrap();
            for i in 0..5 {
                for j in 0..5 {
                    acc[(i, j)] += f.realized[(0, i)] * f.realized[(0, j)];
                }
            }
        }
        acc.mapv_inplace(|v| v / n as f64);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..5 {
            for j in 0..5 {
                num += (acc[(i, j)] - want[(i, j)]).powi(2);
                den += want[(i, j)].powi(2);
            }
        }
        let rel = (num / den).sqrt();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
    }

    #[test]
    fn zero_weights_give_constant_path() {
        let grid = TimeGrid::integer_buckets(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let z = Array2::from_shape_fn((2, 4), |_| StandardNormal.sample(&mut rng));
        let f = realize_factors(&z, &[1.0, 2.0], &grid).unwrap();
        let omega = WeightTensor { omega: Array3::<f64>::zeros((2, 3, 2)) };
        let alpha = PopulationMeans { alpha: array![0.3f64, -1.0, 2.5] };
        let p = assemble_sensitivity(1, 2, &alpha, &omega, &f).unwrap();
        assert!(p.values.iter().all(|v| (*v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn identity_weight_reproduces_factor() {
        let grid = TimeGrid::integer_buckets(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = Array2::from_shape_fn((1, 4), |_| StandardNormal.sample(&mut rng));
        let f = realize_factors(&z, &[2.0], &grid).unwrap();
        let mut w = Array3::zeros((1, 1, 1));
        w[(0, 0, 0)] = 1.0;
        let omega = WeightTensor { omega: w };
        let alpha = PopulationMeans { alpha: array![0.0] };
        let p = assemble_sensitivity(0, 0, &alpha, &omega, &f).unwrap();
        for t in 0..4 {
            assert_eq!(p.values[t], f.realized[(0, t)]);
        }
    }

    #[test]
    fn hand_combination() {
        // L=2, alpha=0.5, omega=(2,-1), u1=1, u2=3 at one point -> -0.5
        let f = LatentFactorSet {
            innovations: Array2::zeros((2, 1)),
            length_scales: vec![1.0, 1.0],
            realized: array![[1.0], [3.0]],
        };
        let mut w = Array3::zeros((1, 1, 2));
        w[(0, 0, 0)] = 2.0;
        w[(0, 0, 1)] = -1.0;
        let omega = WeightTensor { omega: w };
        let alpha = PopulationMeans { alpha: array![0.5] };
        let p = assemble_sensitivity(0, 0, &alpha, &omega, &f).unwrap();
        assert!((p.values[0] + 0.5).abs() < 1e-15);
    }

    #[test]
    fn linearity_in_weights() {
        let grid = TimeGrid::integer_buckets(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let z = Array2::from_shape_fn((2, 5), |_| StandardNormal.sample(&mut rng));
        let f = realize_factors(&z, &[1.0, 3.0], &grid).unwrap();
        let w = Array3::from_shape_fn((1, 1, 2), |_| StandardNormal.sample(&mut rng));
        let alpha = PopulationMeans { alpha: array![0.7] };
        let c = 2.3;
        let omega1 = WeightTensor { omega: w.clone() };
        let omega_c = WeightTensor { omega: w.mapv(|v| c * v) };
        let p1 = assemble_sensitivity(0, 0, &alpha, &omega1, &f).unwrap();
        let pc = assemble_sensitivity(0, 0, &alpha, &omega_c, &f).unwrap();
        for t in 0..5 {
            let lhs = pc.values[t] - 0.7;
            let rhs = c * (p1.values[t] - 0.7);
            assert!((lhs - rhs).abs() < 1e-12);
        }
    }

    #[test]
    fn sign_flip_leaves_paths_identical() {
        let grid = TimeGrid::integer_buckets(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let z = Array2::from_shape_fn((2, 5), |_| StandardNormal.sample(&mut rng));
        let f = realize_factors(&z, &[1.0, 3.0], &grid).unwrap();
        let w = Array3::from_shape_fn((2, 3, 2), |_| StandardNormal.sample(&mut rng));
        let alpha = PopulationMeans {
            alpha: array![0.1, -0.4, 0.9],
        };

        // flip factor 1: negate innovations row and all weights loading on it
        let mut z_flip = z.clone();
        for t in 0..5 {
            z_flip[(1, t)] = -z_flip[(1, t)];
        }
        let f_flip = realize_factors(&z_flip, &[1.0, 3.0], &grid).unwrap();
        let mut w_flip = w.clone();
        for i in 0..2 {
            for k in 0..3 {
                w_flip[(i, k, 1)] = -w_flip[(i, k, 1)];
            }
        }
        let omega = WeightTensor { omega: w };
        let omega_flip = WeightTensor { omega: w_flip };
        for i in 0..2 {
            for k in 0..3 {
                let a = assemble_sensitivity(i, k, &alpha, &omega, &f).unwrap();
                let b = assemble_sensitivity(i, k, &alpha, &omega_flip, &f_flip).unwrap();
                assert_eq!(a.values, b.values, "paths must be bit-identical");
            }
        }
    }

    #[test]
    fn sigma_omega_identity_case() {
        let tau = array![1.0, 1.0, 1.0];
        let corr = Array2::<f64>::eye(3);
        let s = compose_sigma_omega(&tau, &corr).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert_eq!(s[(i, j)], want);
            }
        }
    }

    #[test]
    fn sigma_omega_hand_case() {
        let tau = array![2.0, 3.0];
        let corr = array![[1.0, 0.5], [0.5, 1.0]];
        let s = compose_sigma_omega(&tau, &corr).unwrap();
        assert_eq!(s[(0, 0)], 4.0);
        assert_eq!(s[(1, 1)], 9.0);
        assert_eq!(s[(0, 1)], 3.0);
        assert_eq!(s[(1, 0)], 3.0);
    }

    #[test]
    fn sigma_omega_diagonal_is_tau_squared() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let y: Vec<f64> = (0..6).map(|_| StandardNormal.sample(&mut rng)).collect();
        let t = crate::transforms::corr_cholesky_constrain(&y, 4).unwrap();
        let corr = t.correlation();
        let tau = array![0.4, 1.3, 2.2, 0.9];
        let s = compose_sigma_omega(&tau, &corr).unwrap();
        for i in 0..4 {
            assert!((s[(i, i)] - tau[i] * tau[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn lkj_identity_is_zero() {
        let eye = Array2::<f64>::eye(5);
        assert_eq!(lkj_log_density_unnormalized(&eye, 2.0).unwrap(), 0.0);
        assert_eq!(lkj_log_density_unnormalized(&eye, 7.5).unwrap(), 0.0);
    }

    #[test]
    fn lkj_two_by_two_closed_form() {
        let corr = array![[1.0f64, 0.6], [0.6, 1.0]];
        let got = lkj_log_density_unnormalized(&corr, 2.0).unwrap();
        assert!((got - (1.0f64 - 0.36).ln()).abs() < 1e-12);
        assert!((got - (-0.446287)).abs() < 1e-6);
    }

    #[test]
    fn lkj_shape_one_is_uniform() {
        let corr = array![[1.0f64, -0.3], [-0.3, 1.0]];
        assert_eq!(lkj_log_density_unnormalized(&corr, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn half_normal_closed_forms() {
        let at_zero: f64 = (2.0f64 / std::f64::consts::PI).sqrt().ln();
        assert!((at_zero - (-0.225791)).abs() < 1e-6);
        let near_zero = half_normal_log_density(1e-12f64, 1.0).unwrap();
        assert!((near_zero - at_zero).abs() < 1e-9);
        let at_one = half_normal_log_density(1.0f64, 1.0).unwrap();
        assert!((at_one - (at_zero - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn half_normal_ratio_cancels_constant() {
        for x in [0.3f64, 1.2, 2.4] {
            let r = half_normal_log_density(x, 1.0).unwrap()
                - half_normal_log_density(1e-14, 1.0).unwrap();
            assert!((r - (-x * x / 2.0)).abs() < 1e-9);
        }
    }

    #[test]
    fn monte_carlo_weight_covariance() {
        // draws of omega rows with a known Sigma converge to it
        let k = 3;
        let tau = array![1.0f64, 2.0, 0.5];
        let corr = array![[1.0, 0.4, 0.2], [0.4, 1.0, -0.3], [0.2, -0.3, 1.0]];
        let sigma = compose_sigma_omega(&tau, &corr).unwrap();
        let chol = linalg::cholesky(&sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut acc = Array2::<f64>::zeros((k, k));
        for _ in 0..n {
            let z: Vec<f64> = (0..k).map(|_| StandardNormal.sample(&mut rng)).collect();
            let w = linalg::lower_matvec(&chol, &z);
            for i in 0..k {
                for j in 0..k {
                    acc[(i, j)] += w[i] * w[j];
                }
            }
        }
        acc.mapv_inplace(|v| v / n as f64);
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..k {
            for j in 0..k {
                num += (acc[(i, j)] - sigma[(i, j)]).powi(2);
                den += sigma[(i, j)].powi(2);
            }
        }
        assert!((num / den).sqrt() < 0.05);
    }

    #[test]
    fn pairwise_sum_stays_available_for_reductions() {
        // guard against accidental removal; likelihood accumulation relies on it
        let v = vec![0.25f64; 1024];
        assert_eq!(stats::pairwise_sum(&v), 256.0);
    }
}
