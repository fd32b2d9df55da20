//! Simulated elicitation sessions for sushi users.
//!
//! A simulated user answers from their true ranking. Candidate pairs are the
//! pairs of the user's ten items that have not been asked yet. After `q`
//! answers the current model ranks the ten items by posterior mean and the
//! rho-regret of that ranking is recorded.
//!
//! A cold session refits the item tree from scratch after every answer. A
//! warm session reuses the item tree of the user's cohort with its structure
//! frozen and the cohort posterior mean as prior mean; only leaf values are
//! refitted.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{all_pairs, random_among, select_among, Strategy};
use crate::exec::Execution;
use crate::posterior::{fit_leaf_posterior, fit_surrogate, FittedModel, LeafPrior, NoiseConfig, PosteriorError};
use crate::sampling::rng_for;
use crate::schema::{ComparisonPair, FeatureSchema, Instance, PreferenceDataset};
use crate::sushi::data::UserRanking;
use crate::sushi::regret::{kendall_tau_b, rho_regret_by_position};
use crate::sushi::user_tree::{grow_user_tree, UserRecord, UserTree, UserTreeConfig};
use crate::tree::{PreferenceTree, TreeConfig};

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error("prior inflation must be positive, got {0}")]
    Inflation(f64),
    #[error("cohort {cohort} posterior has {actual} leaves, its tree has {expected}")]
    UnfittedCohort {
        cohort: usize,
        expected: usize,
        actual: usize,
    },
}

/// Frozen cohort item tree plus the prior it induces.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub cohort: usize,
    pub tree: PreferenceTree,
    pub prior: LeafPrior,
}

/// Routes a new user to a cohort and builds the warm-start prior with
/// isotropic standard deviation `inflation`.
pub fn warm_start_session(
    user_tree: &UserTree,
    features: &Instance,
    inflation: f64,
) -> Result<WarmStart, SessionError> {
    if !(inflation > 0.0 && inflation.is_finite()) {
        return Err(SessionError::Inflation(inflation));
    }
    let cohort = user_tree.route(features);
    let model = &user_tree.cohorts[cohort].model;
    if model.posterior.dim() != model.tree.leaf_count() {
        return Err(SessionError::UnfittedCohort {
            cohort,
            expected: model.tree.leaf_count(),
            actual: model.posterior.dim(),
        });
    }
    Ok(WarmStart {
        cohort,
        tree: model.tree.clone(),
        prior: LeafPrior {
            mean: model.posterior.mean.clone(),
            std: inflation,
        },
    })
}

impl WarmStart {
    /// Leaf posterior after the user's own comparisons.
    pub fn fit(&self, pairs: &[ComparisonPair], sigma_noise: f64) -> Result<FittedModel, PosteriorError> {
        Ok(FittedModel {
            tree: self.tree.clone(),
            posterior: fit_leaf_posterior(&self.tree, pairs, sigma_noise, &self.prior)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    /// Comparisons asked per user; capped at the 45 available pairs.
    pub queries: usize,
    /// Leading comparisons drawn at random before the model drives.
    pub initial_pairs: usize,
    pub strategy: Strategy,
    pub tree: TreeConfig,
    pub noise: NoiseConfig,
    pub prioritize_within_leaf: bool,
    /// Prior standard deviation of warm-started leaves.
    pub inflation: f64,
    pub seed: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        let noise = NoiseConfig::default();
        Self {
            queries: 30,
            initial_pairs: 2,
            strategy: Strategy::Qeubo,
            tree: TreeConfig::default(),
            noise,
            prioritize_within_leaf: true,
            inflation: 10.0 * noise.sigma_prior,
            seed: 0,
        }
    }
}

/// One simulated user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserCurve {
    pub user_id: usize,
    /// Rho-regret after `q` answers, `q = 0 ..= queries`.
    pub rho_regret: Vec<f64>,
    /// Kendall tau-b between predicted and true scores (diagnostic).
    pub kendall_tau: Vec<Option<f64>>,
    /// Answered comparisons as `(winner, loser)` item ids.
    pub answered: Vec<(usize, usize)>,
}

impl UserCurve {
    /// First `q` with rho-regret ≤ `threshold`, or `queries + 1` if never.
    pub fn queries_to(&self, threshold: f64) -> usize {
        self.rho_regret
            .iter()
            .position(|&r| r <= threshold + 1e-12)
            .unwrap_or(self.rho_regret.len())
    }
}

fn scores(model: Option<&FittedModel>, pool: &[Instance], true_order: &[usize]) -> (f64, Option<f64>) {
    // predicted values listed in true order
    let predicted: Vec<f64> = match model {
        Some(m) => true_order.iter().map(|&k| m.predict_mean(&pool[k])).collect(),
        None => vec![0.0; true_order.len()],
    };
    let truth: Vec<f64> = (0..true_order.len()).map(|p| -(p as f64)).collect();
    let rho = rho_regret_by_position(&predicted).expect("rankings hold ten items");
    (rho, kendall_tau_b(&predicted, &truth))
}

/// Runs one user's session. `warm` switches from cold refits to a frozen
/// cohort tree.
pub fn simulate_user(
    ranking: &UserRanking,
    item_instances: &[Instance],
    item_schema: &FeatureSchema,
    cfg: &SessionConfig,
    warm: Option<&WarmStart>,
    exec: Execution,
) -> Result<UserCurve, PosteriorError> {
    // The pool is sorted by item id so that tie-breaking carries no
    // information about the true order.
    let mut ids = ranking.items.clone();
    ids.sort_unstable();
    let pool: Vec<Instance> = ids.iter().map(|&id| item_instances[id].clone()).collect();
    let position = |k: usize| ranking.items.iter().position(|&id| id == ids[k]).expect("same items");
    // pool indices in true order
    let true_order: Vec<usize> = ranking
        .items
        .iter()
        .map(|id| ids.iter().position(|x| x == id).expect("same items"))
        .collect();

    let candidates = all_pairs(pool.len());
    let budget = cfg.queries.min(candidates.len());
    let mut asked: HashSet<(usize, usize)> = HashSet::new();
    let mut data = PreferenceDataset::new(item_schema.clone());
    let mut answered = Vec::with_capacity(budget);
    let mut model = match warm {
        Some(w) => Some(w.fit(&[], cfg.noise.sigma_noise)?),
        None => None,
    };
    let mut rho_regret = Vec::with_capacity(budget + 1);
    let mut kendall_tau = Vec::with_capacity(budget + 1);
    let user_seed = cfg.seed.wrapping_add(ranking.user_id as u64);

    for q in 0..budget {
        let (rho, tau) = scores(model.as_ref(), &pool, &true_order);
        rho_regret.push(rho);
        kendall_tau.push(tau);

        let open: Vec<(usize, usize)> = candidates.iter().copied().filter(|p| !asked.contains(p)).collect();
        let random = q < cfg.initial_pairs || cfg.strategy == Strategy::Random;
        let (i, j) = match (&model, random) {
            (Some(m), false) => select_among(m, item_schema, &pool, &open, cfg.prioritize_within_leaf, exec),
            _ => random_among(&open, &mut rng_for(user_seed, q as u64)),
        }
        .expect("open pairs remain within the budget");
        asked.insert((i, j));

        let (w, l) = if position(i) < position(j) { (i, j) } else { (j, i) };
        answered.push((ids[w], ids[l]));
        data.push(ComparisonPair::new(pool[w].clone(), pool[l].clone()))
            .expect("item instances match the item schema");
        model = Some(match warm {
            Some(ws) => ws.fit(data.pairs(), cfg.noise.sigma_noise)?,
            None => fit_surrogate(&data, &cfg.tree, &cfg.noise)?,
        });
    }
    let (rho, tau) = scores(model.as_ref(), &pool, &true_order);
    rho_regret.push(rho);
    kendall_tau.push(tau);
    Ok(UserCurve {
        user_id: ranking.user_id,
        rho_regret,
        kendall_tau,
        answered,
    })
}

/// Cold-start sessions for every ranking.
pub fn run_cold_sessions(
    rankings: &[UserRanking],
    item_instances: &[Instance],
    item_schema: &FeatureSchema,
    cfg: &SessionConfig,
    exec: Execution,
) -> Result<Vec<UserCurve>, PosteriorError> {
    exec.map_slice(rankings, |r| {
        simulate_user(r, item_instances, item_schema, cfg, None, Execution::Sequential)
    })
    .into_iter()
    .collect()
}

/// Mean and sample standard deviation per query index.
pub fn summarize(curves: &[UserCurve]) -> (Vec<f64>, Vec<f64>) {
    let len = curves.iter().map(|c| c.rho_regret.len()).min().unwrap_or(0);
    let n = curves.len() as f64;
    let mean: Vec<f64> = (0..len)
        .map(|q| curves.iter().map(|c| c.rho_regret[q]).sum::<f64>() / n)
        .collect();
    let std = (0..len)
        .map(|q| {
            if curves.len() < 2 {
                return 0.0;
            }
            let ss: f64 = curves.iter().map(|c| (c.rho_regret[q] - mean[q]).powi(2)).sum();
            (ss / (n - 1.0)).sqrt()
        })
        .collect();
    (mean, std)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WarmStartConfig {
    /// Users per cohort refresh; the user tree is rebuilt after each batch.
    pub batch_size: usize,
    pub user_tree: UserTreeConfig,
    /// Rho-regret level whose first-passage query count is compared.
    pub threshold: f64,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        Self {
            batch_size: 50,
            user_tree: UserTreeConfig::default(),
            threshold: 1.0,
        }
    }
}

/// One measured user of the warm-start experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedUser {
    pub batch: usize,
    pub cohort: usize,
    pub cold: UserCurve,
    pub warm: UserCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WarmStartReport {
    pub threshold: f64,
    /// Users of the first batch: cold sessions only, used as history.
    pub training_users: usize,
    pub measured: Vec<PairedUser>,
}

impl WarmStartReport {
    pub fn mean_queries_to_threshold(&self) -> (f64, f64) {
        let n = self.measured.len() as f64;
        let cold = self.measured.iter().map(|u| u.cold.queries_to(self.threshold)).sum::<usize>();
        let warm = self.measured.iter().map(|u| u.warm.queries_to(self.threshold)).sum::<usize>();
        (cold as f64 / n, warm as f64 / n)
    }

    pub fn cold_curves(&self) -> Vec<UserCurve> {
        self.measured.iter().map(|u| u.cold.clone()).collect()
    }

    pub fn warm_curves(&self) -> Vec<UserCurve> {
        self.measured.iter().map(|u| u.warm.clone()).collect()
    }
}

/// Processes users in batches. The first batch runs cold and seeds the
/// history; every later user runs both cold and warm-started from the user
/// tree built on all earlier users' warm-session answers.
pub fn run_warm_start_experiment(
    users: &[(Instance, UserRanking)],
    user_schema: &FeatureSchema,
    item_instances: &[Instance],
    item_schema: &FeatureSchema,
    session: &SessionConfig,
    cfg: &WarmStartConfig,
    exec: Execution,
) -> Result<WarmStartReport, SessionError> {
    assert!(cfg.batch_size >= 1, "batch size must be positive");
    let mut history: Vec<UserRecord> = Vec::new();
    let mut measured = Vec::new();
    let mut training_users = 0;
    for (batch, chunk) in users.chunks(cfg.batch_size).enumerate() {
        if batch == 0 {
            let rankings: Vec<UserRanking> = chunk.iter().map(|(_, r)| r.clone()).collect();
            let curves = run_cold_sessions(&rankings, item_instances, item_schema, session, exec)?;
            training_users = chunk.len();
            for ((features, _), curve) in chunk.iter().zip(curves) {
                history.push(UserRecord {
                    user_id: curve.user_id,
                    features: features.clone(),
                    comparisons: curve.answered,
                });
            }
            continue;
        }
        let tree = grow_user_tree(&history, user_schema, item_instances, item_schema, &cfg.user_tree, exec)?;
        let results = exec.map_slice(chunk, |(features, ranking)| -> Result<PairedUser, SessionError> {
            let start = warm_start_session(&tree, features, session.inflation)?;
            let cold = simulate_user(ranking, item_instances, item_schema, session, None, Execution::Sequential)?;
            let warm = simulate_user(ranking, item_instances, item_schema, session, Some(&start), Execution::Sequential)?;
            Ok(PairedUser {
                batch,
                cohort: start.cohort,
                cold,
                warm,
            })
        });
        for ((features, _), result) in chunk.iter().zip(results) {
            let paired = result?;
            history.push(UserRecord {
                user_id: paired.warm.user_id,
                features: features.clone(),
                comparisons: paired.warm.answered.clone(),
            });
            measured.push(paired);
        }
    }
    Ok(WarmStartReport {
        threshold: cfg.threshold,
        training_users,
        measured,
    })
}
