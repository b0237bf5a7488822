//! Offline evaluation: checkpoint splits, ranking metrics and the recency and
//! weighting experiments.

mod experiments;
mod metrics;
mod split;

pub use experiments::{
    eval_filter, run_recency_experiment, run_weighting_experiment, RecencyParams, WeightingParams,
};
pub use metrics::{map_at_k, ndcg};
pub use split::{checkpoint_bounds, checkpoint_split, group_by_user, EvalSplit, UserSplit};

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::ListingType;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("relevant set is empty")]
    EmptyRelevant,
    #[error("event log spans {span_ms} ms, the experiment needs at least {needed_ms} ms")]
    InsufficientSpan { span_ms: i64, needed_ms: i64 },
    #[error(transparent)]
    Collab(#[from] crate::collab::CollabError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub experiment: String,
    pub listing_type: ListingType,
    pub map_at_k: f64,
    pub ndcg: f64,
    /// Evaluation units averaged: users, or (user, slice) pairs for recency.
    pub users_evaluated: usize,
    /// Units dropped because nothing relevant was left to find.
    pub users_without_relevant: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub k: usize,
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    pub fn row(&self, experiment: &str, listing_type: ListingType) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.experiment == experiment && r.listing_type == listing_type)
    }

    /// Header `experiment,listing_type,map_at_<k>,ndcg,users`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("experiment,listing_type,map_at_{},ndcg,users\n", self.k);
        for r in &self.rows {
            let _ = writeln!(out, "{},{},{:.6},{:.6},{}", r.experiment, r.listing_type.as_str(), r.map_at_k, r.ndcg, r.users_evaluated);
        }
        out
    }

    pub fn to_table(&self) -> String {
        let map_col = format!("MAP@{}", self.k);
        let mut out = format!("{:<16} {:<6} {:>8} {:>8} {:>8}\n", "experiment", "type", map_col, "NDCG", "users");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:<16} {:<6} {:>8.4} {:>8.4} {:>8}",
                r.experiment,
                r.listing_type.as_str(),
                r.map_at_k,
                r.ndcg,
                r.users_evaluated
            );
        }
        out
    }
}

/// Running mean of the two metrics.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Accumulator {
    map: f64,
    ndcg: f64,
    n: usize,
    empty: usize,
}

impl Accumulator {
    pub(crate) fn push(&mut self, map: f64, ndcg: f64) {
        self.map += map;
        self.ndcg += ndcg;
        self.n += 1;
    }

    pub(crate) fn skip(&mut self) {
        self.empty += 1;
    }

    pub(crate) fn row(&self, experiment: impl Into<String>, listing_type: ListingType) -> MetricRow {
        let d = self.n.max(1) as f64;
        MetricRow {
            experiment: experiment.into(),
            listing_type,
            map_at_k: self.map / d,
            ndcg: self.ndcg / d,
            users_evaluated: self.n,
            users_without_relevant: self.empty,
        }
    }
}
