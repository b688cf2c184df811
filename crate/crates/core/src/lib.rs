//! Fast approximate inference for Dirichlet process Gaussian mixtures.
//!
//! Observations are allocated in one greedy sequential pass per ordering
//! ([`sugs`]), alternated with greedy variable selection ([`varsel`]) and
//! repeated over random orderings and variable sub-samples. The resulting
//! models are scored ([`scoring`]) and either the best one is kept or they
//! are averaged into a co-clustering matrix ([`bma`]). [`eval`] generates
//! synthetic benchmarks and scores clusterings against the truth.
//!
//! Partitions are zero-based label vectors in data order.

// `!(x >= y)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bma;
pub mod conjugate;
pub mod data;
pub mod error;
pub mod eval;
pub mod math;
pub mod scoring;
pub mod sugs;
pub mod varsel;

pub use bma::{
    average_models, bma_coclustering, bma_variable_scores, coclustering, model_weights,
    occams_window, summarize, BmaSummary, CoClusterMatrix, ModelWeights, VariableScore,
};
pub use conjugate::{ClusterState, Hyperparameters};
pub use error::{Error, Result};
pub use eval::{adjusted_rand_index, simulate, variable_recovery, LabeledDataset, ScenarioSpec};
pub use scoring::{
    log_marginal_likelihood_model, log_pseudo_marginal_likelihood, select_best, Criterion,
    FittedModel, PmlMode, Provenance,
};
pub use sugs::{sugs_pass, BetaGrid, BetaPosterior, SugsFit};
pub use varsel::{
    default_subsamples, full_search, subsample_init, sugsvarsel_pass, ModelSet, SearchConfig,
    VarSelFit,
};
