use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::{PropertyId, Timestamp, UserCategory, UserId};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub property_id: PropertyId,
    pub score: f64,
}

impl ScoredItem {
    pub fn new(property_id: PropertyId, score: f64) -> Self {
        ScoredItem { property_id, score }
    }
}

/// Descending score, ties by ascending property id.
pub fn rank_order(a: &ScoredItem, b: &ScoredItem) -> Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.property_id.cmp(&b.property_id))
}

pub fn sort_ranked(items: &mut [ScoredItem]) {
    items.sort_by(rank_order);
}

/// Keeps the `k` best items in rank order.
pub fn top_k(mut items: Vec<ScoredItem>, k: usize) -> Vec<ScoredItem> {
    if items.len() > k && k > 0 {
        items.select_nth_unstable_by(k - 1, rank_order);
        items.truncate(k);
    }
    sort_ranked(&mut items);
    items.truncate(k);
    items
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelUsed {
    ColdStart,
    ContentShort,
    ContentLong,
    Collab,
    Hybrid,
}

impl ModelUsed {
    pub const ALL: [ModelUsed; 5] =
        [ModelUsed::ColdStart, ModelUsed::ContentShort, ModelUsed::ContentLong, ModelUsed::Collab, ModelUsed::Hybrid];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelUsed::ColdStart => "cold_start",
            ModelUsed::ContentShort => "content_short",
            ModelUsed::ContentLong => "content_long",
            ModelUsed::Collab => "collab",
            ModelUsed::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for ModelUsed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Ranked recommendations for one request, as returned by the API.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecommendationResponse {
    pub user_id: UserId,
    pub category: UserCategory,
    pub model_used: ModelUsed,
    pub items: Vec<ScoredItem>,
    pub served_at: Timestamp,
    pub latency_ms: f64,
    /// Set when `items` is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Snapshot versions the response was computed from, by artifact kind.
    #[serde(default)]
    pub snapshots: BTreeMap<String, String>,
}
