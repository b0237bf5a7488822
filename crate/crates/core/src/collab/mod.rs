//! Collaborative filtering: weighted interaction matrix, ALS factorization and
//! dot-product ranking for users covered by the latest training run.

mod als;
mod matrix;
mod model;
mod weighting;

pub use als::{als_train, AlsFactors, AlsParams};
pub use matrix::{build_matrix, Aggregation, InteractionMatrix, MatrixParams};
pub use model::{recommend_collab, train_collab, train_collab_at, FactorModel, ModelHeader, FACTOR_MODEL_MAGIC, FACTOR_MODEL_VERSION};
pub use weighting::{adjusted_event_weight, tfidf_factor, CorpusStats, WeightingScheme};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::UserId;

#[derive(Debug, Error)]
pub enum CollabError {
    #[error("TF-IDF weighting needs corpus statistics covering the property")]
    MissingCorpusStats,
    #[error("no user has enough interactions to build a matrix")]
    EmptyMatrix,
    #[error("singular normal equations for {side} {index}; raise lambda")]
    SingularSolve { side: &'static str, index: usize },
    #[error("ALS objective rose at iteration {iteration}: {before} -> {after}")]
    ObjectiveIncreased { iteration: usize, before: f64, after: f64 },
    #[error("invalid ALS parameters: {0}")]
    InvalidParams(String),
    #[error("user {0} is not covered by the factor model")]
    UserNotCovered(UserId),
    #[error("no indexed property matches the filter")]
    NoCandidates,
    #[error("corrupt factor model: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CollabConfig {
    pub rank: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub seed: u64,
    pub scheme: WeightingScheme,
    pub aggregation: Aggregation,
    pub min_distinct_properties: usize,
}

impl Default for CollabConfig {
    fn default() -> Self {
        CollabConfig {
            rank: 32,
            lambda: 0.1,
            iterations: 10,
            seed: 17,
            scheme: WeightingScheme::Linear,
            aggregation: Aggregation::Max,
            min_distinct_properties: 5,
        }
    }
}

impl CollabConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.rank == 0 {
            return Err("collab.rank must be at least 1".into());
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err("collab.lambda must be a non-negative number".into());
        }
        self.scheme.validate()
    }

    pub fn als_params(&self) -> AlsParams {
        AlsParams { rank: self.rank, lambda: self.lambda, iterations: self.iterations, seed: self.seed }
    }
}
