//! The preferential optimization loop.
//!
//! [`Optimizer`] is the step-wise state machine: it serves the
//! Latin-hypercube initial pairs first, then fits the surrogate from scratch
//! and proposes the acquisition-optimal pair for every further query.
//! [`run`] drives it against an [`Oracle`] and records a [`SessionTrace`].
//! Everything except wall-clock fields is a pure function of the
//! configuration and the answers received.

use std::io::{BufRead, Write};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::{random_pair, select_next_pair_with, AcquisitionConfig, Strategy};
use crate::exec::Execution;
use crate::posterior::{fit_surrogate, FittedModel, NoiseConfig, PosteriorError};
use crate::sampling::{lhs_sample_pairs, rng_for, uniform_instance};
use crate::schema::{CandidatePair, ComparisonPair, FeatureSchema, Instance, PreferenceDataset};
use crate::tree::TreeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Choice {
    A,
    B,
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle failed: {0}")]
    Failed(String),
}

/// The decision-maker.
pub trait Oracle {
    /// Returns which of the two offered instances is preferred.
    fn answer(&mut self, a: &Instance, b: &Instance) -> Result<Choice, OracleError>;

    /// True utility, when the oracle is synthetic.
    fn true_utility(&self, _x: &Instance) -> Option<f64> {
        None
    }

    /// Utility of the global optimum, when known; regret is measured from it.
    fn optimum(&self) -> Option<f64> {
        None
    }
}

/// Noiseless oracle answering by a known utility function.
pub struct UtilityOracle<F> {
    utility: F,
    optimum: Option<f64>,
}

impl<F: Fn(&Instance) -> f64> UtilityOracle<F> {
    pub fn new(utility: F, optimum: Option<f64>) -> Self {
        Self { utility, optimum }
    }
}

impl<F: Fn(&Instance) -> f64> Oracle for UtilityOracle<F> {
    fn answer(&mut self, a: &Instance, b: &Instance) -> Result<Choice, OracleError> {
        Ok(if (self.utility)(a) >= (self.utility)(b) {
            Choice::A
        } else {
            Choice::B
        })
    }

    fn true_utility(&self, x: &Instance) -> Option<f64> {
        Some((self.utility)(x))
    }

    fn optimum(&self) -> Option<f64> {
        self.optimum
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub initial_pairs: usize,
    pub iterations: usize,
    pub tree: TreeConfig,
    pub noise: NoiseConfig,
    pub acquisition: AcquisitionConfig,
    pub strategy: Strategy,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            initial_pairs: 20,
            iterations: 200,
            tree: TreeConfig::default(),
            noise: NoiseConfig::default(),
            acquisition: AcquisitionConfig::default(),
            strategy: Strategy::Qeubo,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn with_seed(self, seed: u64) -> Self {
        Self {
            seed,
            acquisition: AcquisitionConfig {
                seed,
                ..self.acquisition
            },
            ..self
        }
    }

    pub fn budget(&self) -> usize {
        self.initial_pairs + self.iterations
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Initial,
    Model,
    Done,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("no pending pair")]
    NoPending,
    #[error("query budget exhausted")]
    BudgetExhausted,
    #[error("invalid instance: {0}")]
    Schema(#[from] crate::schema::SchemaError),
}

/// Step-wise optimization state.
#[derive(Debug, Clone)]
pub struct Optimizer {
    cfg: RunConfig,
    dataset: PreferenceDataset,
    initial: Vec<CandidatePair>,
    pending: Option<CandidatePair>,
    model: Option<FittedModel>,
    /// Dataset length the cached model was fitted on.
    model_len: usize,
    model_version: u64,
    exec: Execution,
}

impl Optimizer {
    pub fn new(schema: FeatureSchema, cfg: RunConfig) -> Self {
        let initial = lhs_sample_pairs(&schema, cfg.initial_pairs, cfg.seed);
        Self {
            cfg,
            dataset: PreferenceDataset::new(schema),
            initial,
            pending: None,
            model: None,
            model_len: 0,
            model_version: 0,
            exec: Execution::default(),
        }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn schema(&self) -> &FeatureSchema {
        self.dataset.schema()
    }

    pub fn dataset(&self) -> &PreferenceDataset {
        &self.dataset
    }

    pub fn answered(&self) -> usize {
        self.dataset.len()
    }

    pub fn pending(&self) -> Option<&CandidatePair> {
        self.pending.as_ref()
    }

    pub fn model(&self) -> Option<&FittedModel> {
        self.model.as_ref()
    }

    /// Incremented on every fit.
    pub fn model_version(&self) -> u64 {
        self.model_version
    }

    pub fn phase(&self) -> Phase {
        let n = self.answered();
        if n >= self.cfg.budget() {
            Phase::Done
        } else if n < self.initial.len() {
            Phase::Initial
        } else {
            Phase::Model
        }
    }

    pub fn is_done(&self) -> bool {
        self.phase() == Phase::Done
    }

    /// Fits the surrogate on all answers so far unless the cached model is current.
    pub fn fit(&mut self) -> Result<&FittedModel, PosteriorError> {
        if self.model.is_none() || self.model_len != self.dataset.len() {
            let model = fit_surrogate(&self.dataset, &self.cfg.tree, &self.cfg.noise)?;
            self.model = Some(model);
            self.model_len = self.dataset.len();
            self.model_version += 1;
        }
        Ok(self.model.as_ref().expect("model was just fitted"))
    }

    /// Returns the pending pair, computing it if necessary.
    pub fn propose(&mut self) -> Result<&CandidatePair, RunError> {
        if self.pending.is_none() {
            let step = self.answered();
            let pair = match self.phase() {
                Phase::Done => return Err(RunError::BudgetExhausted),
                Phase::Initial => self.initial[step].clone(),
                Phase::Model => match self.cfg.strategy {
                    Strategy::Random => random_pair(self.schema(), self.cfg.seed, step as u64),
                    Strategy::Qeubo => {
                        self.fit()?;
                        let model = self.model.as_ref().expect("fitted");
                        select_next_pair_with(
                            model,
                            self.dataset.schema(),
                            &self.cfg.acquisition,
                            step as u64,
                            self.exec,
                        )
                    }
                },
            };
            self.pending = Some(pair);
        }
        Ok(self.pending.as_ref().expect("pending was just set"))
    }

    /// Records the answer to the pending pair.
    pub fn answer(&mut self, choice: Choice) -> Result<ComparisonPair, RunError> {
        let pair = self.pending.take().ok_or(RunError::NoPending)?;
        let comparison = match choice {
            Choice::A => ComparisonPair::new(pair.a, pair.b),
            Choice::B => ComparisonPair::new(pair.b, pair.a),
        };
        self.dataset.push(comparison.clone())?;
        Ok(comparison)
    }

    /// Recommendation from the current (possibly stale) model: the observed
    /// instance with the highest predicted mean, earliest on ties. Without a
    /// model every prediction ties and the earliest observation wins.
    pub fn recommend_by_model(&self) -> Option<Instance> {
        recommend_by_model(&self.dataset, self.model.as_ref())
    }
}

/// Observed instance with the highest true utility, earliest on ties.
pub fn recommend_by_utility(
    dataset: &PreferenceDataset,
    utility: impl Fn(&Instance) -> f64,
) -> Option<(Instance, f64)> {
    let mut best: Option<(&Instance, f64)> = None;
    for x in dataset.observed_instances() {
        let u = utility(x);
        if best.is_none_or(|(_, b)| u > b) {
            best = Some((x, u));
        }
    }
    best.map(|(x, u)| (x.clone(), u))
}

pub fn recommend_by_model(dataset: &PreferenceDataset, model: Option<&FittedModel>) -> Option<Instance> {
    match model {
        None => dataset.observed_instances().next().cloned(),
        Some(model) => recommend_by_utility(dataset, |x| model.predict_mean(x)).map(|(x, _)| x),
    }
}

/// One answered query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: usize,
    pub queried: CandidatePair,
    pub winner: Choice,
    /// Seconds since the Unix epoch when the answer was recorded.
    pub timestamp: f64,
    pub incumbent: Instance,
    /// `f(x*) − f(x̂)`, present for synthetic oracles.
    pub regret: Option<f64>,
    /// Wall time spent producing this query (fit plus acquisition once the
    /// model drives the search).
    pub fit_wall_time: f64,
    pub model_version: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionTrace {
    pub records: Vec<TraceRecord>,
}

impl SessionTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn regrets(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.regret).collect()
    }

    /// Running sum of `fit_wall_time`.
    pub fn cumulative_seconds(&self) -> Vec<f64> {
        self.records
            .iter()
            .scan(0.0, |acc, r| {
                *acc += r.fit_wall_time;
                Some(*acc)
            })
            .collect()
    }

    /// Copy with wall-clock fields zeroed; equal for equal seeds and answers.
    pub fn without_timing(&self) -> Self {
        Self {
            records: self
                .records
                .iter()
                .map(|r| TraceRecord {
                    timestamp: 0.0,
                    fit_wall_time: 0.0,
                    ..r.clone()
                })
                .collect(),
        }
    }

    /// JSON lines, one record per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(input: R) -> std::io::Result<Self> {
        let mut records = Vec::new();
        for line in input.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line)?);
        }
        Ok(Self { records })
    }
}

/// Failed run with everything recorded before the failure.
#[derive(Debug, Error)]
#[error("run aborted after {} records: {source}", partial.len())]
pub struct RunFailure {
    pub partial: SessionTrace,
    #[source]
    pub source: RunError,
}

pub fn now_seconds() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Runs the full loop: initial pairs, then `iterations` model-driven queries.
pub fn run<O: Oracle + ?Sized>(
    oracle: &mut O,
    schema: &FeatureSchema,
    cfg: &RunConfig,
) -> Result<SessionTrace, RunFailure> {
    run_with(oracle, schema, cfg, Execution::default())
}

pub fn run_with<O: Oracle + ?Sized>(
    oracle: &mut O,
    schema: &FeatureSchema,
    cfg: &RunConfig,
    exec: Execution,
) -> Result<SessionTrace, RunFailure> {
    let mut opt = Optimizer::new(schema.clone(), *cfg).with_execution(exec);
    let mut trace = SessionTrace::default();
    let probe = uniform_instance(schema, &mut rng_for(cfg.seed, u64::MAX));
    let synthetic = oracle.true_utility(&probe).is_some();
    macro_rules! bail {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(e) => {
                    return Err(RunFailure {
                        partial: trace,
                        source: e.into(),
                    })
                }
            }
        };
    }
    while !opt.is_done() {
        let started = Instant::now();
        let pair = bail!(opt.propose()).clone();
        let fit_wall_time = started.elapsed().as_secs_f64();
        let choice = bail!(oracle.answer(&pair.a, &pair.b));
        bail!(opt.answer(choice));

        let (incumbent, regret) = if synthetic {
            let (x, u) = recommend_by_utility(opt.dataset(), |x| {
                oracle.true_utility(x).expect("synthetic oracle")
            })
            .expect("at least one observation");
            let regret = oracle.optimum().map(|best| best - u);
            (x, regret)
        } else {
            bail!(opt.fit());
            (opt.recommend_by_model().expect("at least one observation"), None)
        };
        trace.records.push(TraceRecord {
            step: opt.answered() - 1,
            queried: pair,
            winner: choice,
            timestamp: now_seconds(),
            incumbent,
            regret,
            fit_wall_time,
            model_version: opt.model_version(),
        });
    }
    Ok(trace)
}
