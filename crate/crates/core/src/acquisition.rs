//! Query selection over a fitted tree model.
//!
//! Two options offered together are jointly Gaussian under the leaf
//! posterior, so the expected utility of the better one has a closed form:
//! with `s² = var_a + var_b − 2 cov` and `α = (μ_a − μ_b)/s`,
//! `E[max(F_a, F_b)] = μ_a Φ(α) + μ_b Φ(−α) + s φ(α)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::exec::Execution;
use crate::posterior::{FittedModel, LatentPosterior};
use crate::probit;
use crate::sampling::{rng_for, uniform_instance};
use crate::schema::{CandidatePair, FeatureSchema, Instance};
use crate::tree::PreferenceTree;

/// Pair-selection rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    Qeubo,
    /// Uniformly random pair; the baseline.
    Random,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "qeubo" => Ok(Strategy::Qeubo),
            "random" => Ok(Strategy::Random),
            other => Err(format!("unknown acquisition `{other}` (expected qeubo|random)")),
        }
    }
}

impl std::fmt::Display for Strategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strategy::Qeubo => "qeubo",
            Strategy::Random => "random",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcquisitionConfig {
    /// Number of uniformly drawn candidates; all unordered pairs among them are scored.
    pub pool_size: usize,
    pub prioritize_within_leaf: bool,
    pub seed: u64,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        Self {
            pool_size: 64,
            prioritize_within_leaf: false,
            seed: 0,
        }
    }
}

/// Leaf-wise Gaussian prediction for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
    pub leaf: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairPrediction {
    pub mean_a: f64,
    pub mean_b: f64,
    pub var_a: f64,
    pub var_b: f64,
    pub covariance: f64,
}

pub fn predict(tree: &PreferenceTree, posterior: &LatentPosterior, instance: &Instance) -> Prediction {
    let leaf = tree.route(instance);
    Prediction {
        mean: posterior.mean[leaf],
        variance: posterior.variance(leaf),
        leaf,
    }
}

fn pair_from_leaves(posterior: &LatentPosterior, a: usize, b: usize) -> PairPrediction {
    let var_a = posterior.variance(a);
    let var_b = posterior.variance(b);
    // clip round-off so the 2x2 block stays positive semi-definite
    let bound = (var_a * var_b).sqrt();
    PairPrediction {
        mean_a: posterior.mean[a],
        mean_b: posterior.mean[b],
        var_a,
        var_b,
        covariance: posterior.covariance[(a, b)].clamp(-bound, bound),
    }
}

pub fn pair_prediction(
    tree: &PreferenceTree,
    posterior: &LatentPosterior,
    a: &Instance,
    b: &Instance,
) -> PairPrediction {
    pair_from_leaves(posterior, tree.route(a), tree.route(b))
}

/// Expected maximum of the two jointly Gaussian utilities.
pub fn qeubo_value(p: &PairPrediction) -> f64 {
    let s2 = p.var_a + p.var_b - 2.0 * p.covariance;
    let s = s2.max(0.0).sqrt();
    if s <= 1e-12 {
        return p.mean_a.max(p.mean_b);
    }
    let alpha = (p.mean_a - p.mean_b) / s;
    p.mean_a * probit::cdf(alpha) + p.mean_b * probit::cdf(-alpha) + s * probit::pdf(alpha)
}

/// Saturation bound for within-leaf prioritization.
fn within_leaf_bound(tree: &PreferenceTree) -> usize {
    4 * tree.config.min_samples_split.max(1)
}

/// Picks the best of `pairs` (index pairs into `pool`).
///
/// With `prioritize_within_leaf`, the leaf with the highest posterior mean
/// among the leaves holding at least one candidate pair wins outright when
/// fewer than `4 · min_samples_split` training pairs reached it; the pair
/// returned is its two most distant pool members. Otherwise the qEUBO
/// maximizer is returned, ties going to the earliest pair in `pairs`.
pub fn select_among(
    model: &FittedModel,
    schema: &FeatureSchema,
    pool: &[Instance],
    pairs: &[(usize, usize)],
    prioritize_within_leaf: bool,
    exec: Execution,
) -> Option<(usize, usize)> {
    if pairs.is_empty() {
        return None;
    }
    let leaves: Vec<usize> = pool.iter().map(|x| model.tree.route(x)).collect();
    let posterior = &model.posterior;

    if prioritize_within_leaf {
        let mut top: Option<usize> = None;
        for &(i, j) in pairs {
            if leaves[i] == leaves[j] {
                let leaf = leaves[i];
                if top.is_none_or(|t| posterior.mean[leaf] > posterior.mean[t]) {
                    top = Some(leaf);
                }
            }
        }
        if let Some(leaf) = top {
            if model.tree.pair_count(leaf) < within_leaf_bound(&model.tree) {
                let mut best: Option<((usize, usize), f64)> = None;
                for &(i, j) in pairs.iter().filter(|&&(i, j)| leaves[i] == leaf && leaves[j] == leaf) {
                    let d = schema.distance(&pool[i], &pool[j]);
                    if best.is_none_or(|(_, bd)| d > bd) {
                        best = Some(((i, j), d));
                    }
                }
                if let Some((pair, _)) = best {
                    return Some(pair);
                }
            }
        }
    }

    let scores = exec.map(pairs.len(), |k| {
        let (i, j) = pairs[k];
        qeubo_value(&pair_from_leaves(posterior, leaves[i], leaves[j]))
    });
    let mut best = 0;
    for (k, &score) in scores.iter().enumerate() {
        if score > scores[best] {
            best = k;
        }
    }
    Some(pairs[best])
}

/// All unordered index pairs `(i, j)`, `i < j`, in lexicographic order.
pub fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect()
}

/// Draws `pool_size` uniform instances and returns the qEUBO-best pair.
pub fn select_next_pair(
    model: &FittedModel,
    schema: &FeatureSchema,
    cfg: &AcquisitionConfig,
) -> CandidatePair {
    select_next_pair_with(model, schema, cfg, 0, Execution::default())
}

/// Same as [`select_next_pair`] with an explicit RNG stream (the loop step)
/// and execution mode.
pub fn select_next_pair_with(
    model: &FittedModel,
    schema: &FeatureSchema,
    cfg: &AcquisitionConfig,
    stream: u64,
    exec: Execution,
) -> CandidatePair {
    let mut rng = rng_for(cfg.seed, stream);
    let pool: Vec<Instance> = (0..cfg.pool_size.max(2))
        .map(|_| uniform_instance(schema, &mut rng))
        .collect();
    let pairs = all_pairs(pool.len());
    let (i, j) = select_among(model, schema, &pool, &pairs, cfg.prioritize_within_leaf, exec)
        .expect("pool holds at least two instances");
    CandidatePair::new(pool[i].clone(), pool[j].clone())
}

/// A uniformly random pair for the random-acquisition baseline.
pub fn random_pair(schema: &FeatureSchema, seed: u64, stream: u64) -> CandidatePair {
    let mut rng = rng_for(seed, stream);
    let a = uniform_instance(schema, &mut rng);
    let b = uniform_instance(schema, &mut rng);
    CandidatePair::new(a, b)
}

/// Uniform choice among index pairs.
pub fn random_among<R: Rng + ?Sized>(pairs: &[(usize, usize)], rng: &mut R) -> Option<(usize, usize)> {
    if pairs.is_empty() {
        None
    } else {
        Some(pairs[rng.random_range(0..pairs.len())])
    }
}
