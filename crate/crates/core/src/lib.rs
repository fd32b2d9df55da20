//! Preferential Bayesian optimization with an interpretable surrogate.
//!
//! The surrogate is a single axis-aligned decision tree grown directly from
//! pairwise comparisons, with a joint Gaussian over the leaf utilities fitted
//! by a Laplace approximation and conditioned on a sum-to-zero constraint.
//! Queries are chosen by the expected utility of the best option (qEUBO).
//!
//! Module map:
//!
//! * [`schema`]: mixed continuous/categorical search spaces, instances and comparisons.
//! * [`sampling`]: Latin-hypercube initial designs.
//! * [`tree`]: consistency-score split search and tree growth.
//! * [`posterior`]: probit likelihood, MAP estimation, Laplace covariance, conditioning.
//! * [`acquisition`]: leaf-wise predictions and qEUBO pair selection.
//! * [`optimize`]: the optimization loop, oracles and traces.
//! * [`benchmarks`]: negated test functions and the regret/timing experiment.
//! * [`sushi`]: the sushi preference data, rho-regret, user trees and warm starts.
//! * [`explain`]: human-readable tree explanations.

pub mod acquisition;
pub mod benchmarks;
pub mod exec;
pub mod explain;
pub mod optimize;
pub mod posterior;
pub mod probit;
pub mod sampling;
pub mod schema;
pub mod sushi;
pub mod tree;

pub use acquisition::{AcquisitionConfig, PairPrediction, Prediction, Strategy};
pub use exec::Execution;
pub use optimize::{Choice, Optimizer, Oracle, RunConfig, SessionTrace, TraceRecord};
pub use posterior::{FittedModel, LatentPosterior, LeafPrior, NoiseConfig};
pub use schema::{
    CandidatePair, ComparisonPair, FeatureKind, FeatureSchema, FeatureSpec, Instance,
    PreferenceDataset,
};
pub use tree::{PreferenceTree, SplitTest, TreeConfig, TreeNode};
