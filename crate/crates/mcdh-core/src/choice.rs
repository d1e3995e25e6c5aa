//! Multinomial-logit utilities, choice probabilities, and the panel
//! log-likelihood given sensitivity paths.

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};
use crate::kernels::TimeGrid;
use crate::model::ModelDims;
use crate::scalar::Scalar;
use crate::stats;

/// One choice occasion: the alternatives' feature rows and the chosen one.
///
/// `features` is J x P_c with the baseline brand's dummy columns all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceObservation<S: Scalar> {
    pub individual: usize,
    pub category: usize,
    pub time_bucket: usize,
    pub features: Array2<S>,
    pub chosen: usize,
}

impl<S: Scalar> ChoiceObservation<S> {
    pub fn validate(&self, dims: &ModelDims) -> Result<()> {
        if self.individual >= dims.individuals {
            return Err(Error::Consistency(format!(
                "individual {} out of range ({})",
                self.individual, dims.individuals
            )));
        }
        if self.category >= dims.categories {
            return Err(Error::Consistency(format!(
                "category {} out of range ({})",
                self.category, dims.categories
            )));
        }
        if self.time_bucket >= dims.time_buckets {
            return Err(Error::Consistency(format!(
                "time bucket {} out of range ({})",
                self.time_bucket, dims.time_buckets
            )));
        }
        let (j, p) = self.features.dim();
        if j != dims.brands_per_category[self.category] {
            return Err(Error::Consistency(format!(
                "observation has {j} alternatives but category {} has {}",
                self.category, dims.brands_per_category[self.category]
            )));
        }
        if p != dims.coeffs_per_category[self.category] {
            return Err(Error::Consistency(format!(
                "observation has {p} feature columns but category {} has {}",
                self.category, dims.coeffs_per_category[self.category]
            )));
        }
        if self.chosen >= j {
            return Err(Error::Consistency(format!(
                "chosen alternative {} out of range ({j})",
                self.chosen
            )));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Consistency(
                "observation features must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// Long-format choice observations with their dimensions and time grid.
#[derive(Debug, Clone)]
pub struct Panel<S: Scalar> {
    pub observations: Vec<ChoiceObservation<S>>,
    pub dims: ModelDims,
    pub grid: TimeGrid<S>,
}

impl<S: Scalar> Panel<S> {
    pub fn new(
        observations: Vec<ChoiceObservation<S>>,
        dims: ModelDims,
        grid: TimeGrid<S>,
    ) -> Result<Self> {
        if grid.len() != dims.time_buckets {
            return Err(Error::Consistency(format!(
                "grid length {} does not match time_buckets {}",
                grid.len(),
                dims.time_buckets
            )));
        }
        let mut seen = vec![false; dims.individuals];
        for obs in &observations {
            obs.validate(&dims)?;
            seen[obs.individual] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Consistency(format!(
                "individual {missing} has no observations"
            )));
        }
        Ok(Self { observations, dims, grid })
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }
}

/// Deterministic utilities of each alternative: the feature rows dotted with
/// the category's coefficient slice.
pub fn utilities<S: Scalar>(obs: &ChoiceObservation<S>, beta_slice: &[S]) -> Result<Vec<S>> {
    let (j, p) = obs.features.dim();
    if beta_slice.len() != p {
        return Err(Error::Consistency(format!(
            "beta slice has length {} but observation has {p} columns",
            beta_slice.len()
        )));
    }
    let mut v = Vec::with_capacity(j);
    for alt in 0..j {
        let mut u = S::zero();
        for col in 0..p {
            u = u + obs.features[(alt, col)] * beta_slice[col];
        }
        v.push(u);
    }
    Ok(v)
}

/// Softmax with max-subtraction; sums to 1 and never yields NaN/Inf for
/// finite inputs.
pub fn choice_probabilities<S: Scalar>(utilities: &[S]) -> Vec<S> {
    let max = utilities
        .iter()
        .copied()
        .fold(S::neg_infinity(), |a, b| if b > a { b } else { a });
    let mut probs: Vec<S> = utilities.iter().map(|u| (*u - max).exp()).collect();
    let total: S = probs.iter().copied().sum();
    for p in probs.iter_mut() {
        *p = *p / total;
    }
    probs
}

/// Log probability of the chosen alternative.
fn log_prob_chosen<S: Scalar>(utils: &[S], chosen: usize) -> S {
    utils[chosen] - stats::log_sum_exp(utils)
}

/// Panel log-likelihood at the given sensitivity paths (I x K x T).
///
/// Observation terms are accumulated with a fixed pairwise reduction so the
/// result is reproducible regardless of worker count.
pub fn log_likelihood<S: Scalar>(panel: &Panel<S>, paths: &Array3<S>) -> Result<S> {
    let (n_i, n_k, n_t) = paths.dim();
    if n_i < panel.dims.individuals
        || n_k != panel.dims.total_coeffs()
        || n_t < panel.dims.time_buckets
    {
        return Err(Error::Consistency(format!(
            "paths of shape {n_i}x{n_k}x{n_t} do not cover panel dims \
             {}x{}x{}",
            panel.dims.individuals,
            panel.dims.total_coeffs(),
            panel.dims.time_buckets
        )));
    }
    let mut terms = Vec::with_capacity(panel.len());
    let mut beta = Vec::new();
    for obs in &panel.observations {
        let off = panel.dims.coeff_offset(obs.category);
        let p = panel.dims.coeffs_per_category[obs.category];
        beta.clear();
        for col in 0..p {
            beta.push(paths[(obs.individual, off + col, obs.time_bucket)]);
        }
        let utils = utilities(obs, &beta)?;
        terms.push(log_prob_chosen(&utils, obs.chosen));
    }
    let ll = stats::pairwise_sum(&terms);
    if !ll.is_finite() {
        return Err(Error::NumericalInstability(
            "log-likelihood is not finite".into(),
        ));
    }
    Ok(ll)
}
