//! Joint Gaussian over the leaf utilities.
//!
//! The negative log posterior over leaf values `f` is
//!
//! ```text
//! L(f) = -Σ_k mult_k · ln Φ((f[w_k] - f[l_k]) / (√2 σ_noise)) + |f - μ₀|² / (2 σ²)
//! ```
//!
//! with `μ₀ = 0` and `σ = σ_prior` unless a warm-start prior is supplied.
//! `L` is strictly convex, so its minimizer is found by damped Newton from
//! the prior mean. The Laplace covariance is the inverse Hessian at the
//! minimizer, and the resulting Gaussian is finally conditioned on
//! `Σ f_i = 0` to remove the shift direction the likelihood cannot see.

use std::collections::BTreeMap;
use std::f64::consts::SQRT_2;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::probit;
use crate::schema::{ComparisonPair, PreferenceDataset};
use crate::tree::{grow_tree, PreferenceTree, TreeConfig};

const GRADIENT_TOLERANCE: f64 = 1e-8;
const MAX_NEWTON_ITERATIONS: usize = 200;
const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;
const DECREMENT_RESOLUTION: f64 = 1e3 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PosteriorError {
    #[error("leaf index {index} out of range for {leaves} leaves")]
    LeafOutOfRange { index: usize, leaves: usize },
    #[error("Newton iteration did not converge after {iterations} iterations (gradient max-norm {gradient_norm:e})")]
    NotConverged {
        iterations: usize,
        gradient_norm: f64,
    },
    #[error("Hessian is not numerically positive definite")]
    Factorization,
    #[error("constraint variance 1ᵀΣ1 = {0} is not positive")]
    DegenerateConstraint(f64),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("posterior is already conditioned on the sum-to-zero constraint")]
    AlreadyConstrained,
    #[error("noise scales must be positive and finite")]
    InvalidNoise,
}

/// A comparison between two different leaves, aggregated over repeats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LeafPair {
    pub winner_leaf: usize,
    pub loser_leaf: usize,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub sigma_noise: f64,
    pub sigma_prior: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            sigma_noise: 0.01,
            sigma_prior: 0.02,
        }
    }
}

impl NoiseConfig {
    fn validate(&self) -> Result<(), PosteriorError> {
        let ok = |s: f64| s.is_finite() && s > 0.0;
        if ok(self.sigma_noise) && ok(self.sigma_prior) {
            Ok(())
        } else {
            Err(PosteriorError::InvalidNoise)
        }
    }
}

/// Isotropic Gaussian prior `N(mean, std² I)` over leaf values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafPrior {
    pub mean: DVector<f64>,
    pub std: f64,
}

impl LeafPrior {
    /// The zero-mean prior used for a fresh model.
    pub fn centered(leaves: usize, std: f64) -> Self {
        Self {
            mean: DVector::zeros(leaves),
            std,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPosterior {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub constrained: bool,
}

impl LatentPosterior {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variance(&self, leaf: usize) -> f64 {
        self.covariance[(leaf, leaf)].max(0.0)
    }

    pub fn std(&self, leaf: usize) -> f64 {
        self.variance(leaf).sqrt()
    }
}

/// Value and exact derivatives of `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

/// The likelihood part of `L` alone: `-Σ mult · ln Φ(z)`, its gradient and
/// its Hessian `Λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTerm {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub lambda: DMatrix<f64>,
}

fn check_indices(pairs: &[LeafPair], m: usize) -> Result<(), PosteriorError> {
    for p in pairs {
        for index in [p.winner_leaf, p.loser_leaf] {
            if index >= m {
                return Err(PosteriorError::LeafOutOfRange { index, leaves: m });
            }
        }
    }
    Ok(())
}

/// `−Σ mult · ln Φ(z_k)` only; no derivatives.
pub fn data_value(f: &DVector<f64>, pairs: &[LeafPair], sigma_noise: f64) -> f64 {
    let scale = 1.0 / (SQRT_2 * sigma_noise);
    pairs
        .iter()
        .map(|p| {
            let z = (f[p.winner_leaf] - f[p.loser_leaf]) * scale;
            -(p.multiplicity as f64) * probit::log_cdf(z)
        })
        .sum()
}

pub fn data_term(
    f: &DVector<f64>,
    pairs: &[LeafPair],
    sigma_noise: f64,
) -> Result<DataTerm, PosteriorError> {
    let m = f.len();
    check_indices(pairs, m)?;
    let scale = 1.0 / (SQRT_2 * sigma_noise);
    let mut value = 0.0;
    let mut gradient = DVector::zeros(m);
    let mut lambda = DMatrix::zeros(m, m);
    for p in pairs {
        let (w, l) = (p.winner_leaf, p.loser_leaf);
        let mult = p.multiplicity as f64;
        let z = (f[w] - f[l]) * scale;
        let r = probit::inverse_mills(z);
        value -= mult * probit::log_cdf(z);
        // d/dz(-ln Φ) = -r,  d²/dz²(-ln Φ) = r (z + r)
        let g = -mult * r * scale;
        gradient[w] += g;
        gradient[l] -= g;
        let h = mult * r * (z + r) * scale * scale;
        lambda[(w, w)] += h;
        lambda[(l, l)] += h;
        lambda[(w, l)] -= h;
        lambda[(l, w)] -= h;
    }
    Ok(DataTerm {
        value,
        gradient,
        lambda,
    })
}

fn prior_value(f: &DVector<f64>, prior: &LeafPrior) -> f64 {
    (f - &prior.mean).norm_squared() / (2.0 * prior.std * prior.std)
}

/// `L(f)` with the zero-mean `σ_prior` prior, plus gradient and Hessian.
pub fn objective_with_derivatives(
    f: &DVector<f64>,
    pairs: &[LeafPair],
    cfg: &NoiseConfig,
) -> Result<Objective, PosteriorError> {
    cfg.validate()?;
    objective_with_prior(f, pairs, cfg.sigma_noise, &LeafPrior::centered(f.len(), cfg.sigma_prior))
}

pub fn objective_with_prior(
    f: &DVector<f64>,
    pairs: &[LeafPair],
    sigma_noise: f64,
    prior: &LeafPrior,
) -> Result<Objective, PosteriorError> {
    if prior.dim() != f.len() {
        return Err(PosteriorError::DimensionMismatch {
            expected: prior.dim(),
            actual: f.len(),
        });
    }
    let data = data_term(f, pairs, sigma_noise)?;
    let precision = 1.0 / (prior.std * prior.std);
    let mut hessian = data.lambda;
    for i in 0..f.len() {
        hessian[(i, i)] += precision;
    }
    Ok(Objective {
        value: data.value + prior_value(f, prior),
        gradient: data.gradient + (f - &prior.mean) * precision,
        hessian,
    })
}

/// Minimizer of `L` under the zero-mean prior.
pub fn find_map(
    pairs: &[LeafPair],
    m: usize,
    cfg: &NoiseConfig,
) -> Result<DVector<f64>, PosteriorError> {
    cfg.validate()?;
    find_map_with_prior(pairs, cfg.sigma_noise, &LeafPrior::centered(m, cfg.sigma_prior))
}

/// Damped Newton with Armijo backtracking, started at the prior mean.
pub fn find_map_with_prior(
    pairs: &[LeafPair],
    sigma_noise: f64,
    prior: &LeafPrior,
) -> Result<DVector<f64>, PosteriorError> {
    let m = prior.dim();
    check_indices(pairs, m)?;
    let value_at = |f: &DVector<f64>| data_value(f, pairs, sigma_noise) + prior_value(f, prior);
    let mut f = prior.mean.clone();
    let mut gradient_norm = f64::INFINITY;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        let obj = objective_with_prior(&f, pairs, sigma_noise, prior)?;
        gradient_norm = obj.gradient.amax();
        if gradient_norm <= GRADIENT_TOLERANCE {
            return Ok(f);
        }
        let chol = obj.hessian.cholesky().ok_or(PosteriorError::Factorization)?;
        let step = -chol.solve(&obj.gradient);
        let slope = obj.gradient.dot(&step);
        // the Newton decrement is below what the objective can resolve
        if -slope <= DECREMENT_RESOLUTION * obj.value.abs().max(1.0) {
            return Ok(f);
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial = &f + &step * alpha;
            if value_at(&trial) <= obj.value + ARMIJO * alpha * slope {
                f = trial;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Err(PosteriorError::NotConverged {
        iterations: MAX_NEWTON_ITERATIONS,
        gradient_norm,
    })
}

/// Laplace approximation at `f_map`: covariance is the inverse Hessian.
pub fn laplace_posterior(
    f_map: &DVector<f64>,
    pairs: &[LeafPair],
    cfg: &NoiseConfig,
) -> Result<LatentPosterior, PosteriorError> {
    cfg.validate()?;
    laplace_posterior_with_prior(
        f_map,
        pairs,
        cfg.sigma_noise,
        &LeafPrior::centered(f_map.len(), cfg.sigma_prior),
    )
}

pub fn laplace_posterior_with_prior(
    f_map: &DVector<f64>,
    pairs: &[LeafPair],
    sigma_noise: f64,
    prior: &LeafPrior,
) -> Result<LatentPosterior, PosteriorError> {
    let obj = objective_with_prior(f_map, pairs, sigma_noise, prior)?;
    let chol = obj.hessian.cholesky().ok_or(PosteriorError::Factorization)?;
    let mut covariance = chol.inverse();
    symmetrize(&mut covariance);
    Ok(LatentPosterior {
        mean: f_map.clone(),
        covariance,
        constrained: false,
    })
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Conditions the Gaussian on `Σ f_i = 0`:
/// `μ ← μ − (1ᵀμ / 1ᵀΣ1) Σ1` and `Σ ← Σ − (Σ1)(Σ1)ᵀ / 1ᵀΣ1`.
pub fn condition_sum_to_zero(posterior: &LatentPosterior) -> Result<LatentPosterior, PosteriorError> {
    if posterior.constrained {
        return Err(PosteriorError::AlreadyConstrained);
    }
    let sigma = &posterior.covariance;
    let sigma_one: DVector<f64> = sigma.column_sum();
    let total_var = sigma_one.sum();
    // NaN counts as degenerate too
    if total_var.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
        return Err(PosteriorError::DegenerateConstraint(total_var));
    }
    let mean = &posterior.mean - &sigma_one * (posterior.mean.sum() / total_var);
    let mut covariance = sigma - &sigma_one * sigma_one.transpose() / total_var;
    symmetrize(&mut covariance);
    Ok(LatentPosterior {
        mean,
        covariance,
        constrained: true,
    })
}

/// Maps comparisons onto leaves, drops same-leaf pairs and aggregates
/// repeats. Output is sorted by `(winner_leaf, loser_leaf)`.
pub fn leaf_pairs(tree: &PreferenceTree, pairs: &[ComparisonPair]) -> Vec<LeafPair> {
    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for pair in pairs {
        let (w, l) = (tree.route(&pair.winner), tree.route(&pair.loser));
        if w != l {
            *counts.entry((w, l)).or_default() += 1;
        }
    }
    counts
        .into_iter()
        .map(|((winner_leaf, loser_leaf), multiplicity)| LeafPair {
            winner_leaf,
            loser_leaf,
            multiplicity,
        })
        .collect()
}

/// A tree with its constrained leaf posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub tree: PreferenceTree,
    pub posterior: LatentPosterior,
}

impl FittedModel {
    /// Posterior mean of the leaf an instance falls in.
    pub fn predict_mean(&self, instance: &crate::schema::Instance) -> f64 {
        self.posterior.mean[self.tree.route(instance)]
    }
}

/// Leaf posterior for a fixed tree and prior, conditioned on sum-to-zero.
pub fn fit_leaf_posterior(
    tree: &PreferenceTree,
    pairs: &[ComparisonPair],
    sigma_noise: f64,
    prior: &LeafPrior,
) -> Result<LatentPosterior, PosteriorError> {
    if prior.dim() != tree.leaf_count() {
        return Err(PosteriorError::DimensionMismatch {
            expected: tree.leaf_count(),
            actual: prior.dim(),
        });
    }
    let leaf_pairs = leaf_pairs(tree, pairs);
    let f_map = find_map_with_prior(&leaf_pairs, sigma_noise, prior)?;
    let unconstrained = laplace_posterior_with_prior(&f_map, &leaf_pairs, sigma_noise, prior)?;
    condition_sum_to_zero(&unconstrained)
}

/// Grows the tree and fits its constrained leaf posterior.
pub fn fit_surrogate(
    dataset: &PreferenceDataset,
    tree_cfg: &TreeConfig,
    noise_cfg: &NoiseConfig,
) -> Result<FittedModel, PosteriorError> {
    noise_cfg.validate()?;
    let tree = grow_tree(dataset, tree_cfg);
    let prior = LeafPrior::centered(tree.leaf_count(), noise_cfg.sigma_prior);
    let posterior = fit_leaf_posterior(&tree, dataset.pairs(), noise_cfg.sigma_noise, &prior)?;
    Ok(FittedModel { tree, posterior })
}
