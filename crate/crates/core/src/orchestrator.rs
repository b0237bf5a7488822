//! User classification, model dispatch with fallback, and hybrid score fusion.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::cohort::{cohorts_for_page, recommend_cold_start, request_seed, CohortScope, CohortSnapshot};
use crate::collab::{FactorModel, CollabError};
use crate::config::EngineConfig;
use crate::content::{ContentError, ContentSnapshot};
use crate::domain::{Catalog, PropertyId, SearchFilter, Timestamp, UserCategory, UserId};
use crate::response::{top_k, ModelUsed, RecommendationResponse, ScoredItem};
use crate::store::{ArtifactKind, Versioned};

/// What the router knows about a user at request time.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserActivityState {
    pub user_id: UserId,
    pub first_event_at: Option<Timestamp>,
    pub last_event_at: Option<Timestamp>,
    pub distinct_properties: usize,
    pub covered_by_last_als: bool,
    /// Present in the current short-term content snapshot.
    pub has_short_term_profile: bool,
    /// Present in the current long-term content snapshot.
    pub has_long_term_profile: bool,
}

impl UserActivityState {
    /// A user with no events.
    pub fn empty(user_id: UserId) -> Self {
        UserActivityState {
            user_id,
            first_event_at: None,
            last_event_at: None,
            distinct_properties: 0,
            covered_by_last_als: false,
            has_short_term_profile: false,
            has_long_term_profile: false,
        }
    }

    pub fn active_duration(&self) -> Option<i64> {
        Some(self.last_event_at? - self.first_event_at?)
    }
}

/// Per-user event history within the current lifecycle, maintained by ingest.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ActivitySummary {
    pub first_event_at: Timestamp,
    pub last_event_at: Timestamp,
    pub distinct_properties: usize,
}

/// Routes a user through the decision order. Durations are half-open: exactly
/// the cold-start window is no longer cold, exactly the activity gate counts,
/// exactly the inactivity limit is not yet a reset.
pub fn classify_user(state: &UserActivityState, now: Timestamp, config: &EngineConfig) -> UserCategory {
    let (Some(first), Some(last)) = (state.first_event_at, state.last_event_at) else {
        return UserCategory::ColdStart;
    };
    if now - last > config.inactivity_reset.as_millis() {
        return UserCategory::ColdStart;
    }
    if now - first < config.cold_start_window.as_millis() {
        return UserCategory::ColdStart;
    }
    let active = last - first;
    let long_term_model = state.covered_by_last_als || state.has_long_term_profile;
    if active >= config.hybrid_window_start.as_millis()
        && active < config.hybrid_window_end.as_millis()
        && state.has_short_term_profile
        && long_term_model
    {
        return UserCategory::ShortLongTerm;
    }
    if active >= config.long_term_activity_gate.as_millis() && state.distinct_properties >= config.min_properties_long_term {
        return UserCategory::LongTerm;
    }
    UserCategory::ShortTerm
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OrchestratorError {
    #[error("both hybrid inputs are empty")]
    BothEmpty,
}

fn min_max(items: &[ScoredItem]) -> BTreeMap<&PropertyId, f64> {
    let lo = items.iter().map(|i| i.score).fold(f64::INFINITY, f64::min);
    let hi = items.iter().map(|i| i.score).fold(f64::NEG_INFINITY, f64::max);
    items
        .iter()
        .map(|i| {
            let norm = if hi > lo { (i.score - lo) / (hi - lo) } else { 1.0 };
            (&i.property_id, norm)
        })
        .collect()
}

/// Averages the min-max normalized scores of two lists over their union. A
/// property missing from one side scores 0 on that side.
pub fn combine_hybrid(
    content: &[ScoredItem],
    collab: &[ScoredItem],
    k: usize,
) -> Result<Vec<ScoredItem>, OrchestratorError> {
    if content.is_empty() && collab.is_empty() {
        return Err(OrchestratorError::BothEmpty);
    }
    let a = min_max(content);
    let b = min_max(collab);
    let mut union: BTreeMap<&PropertyId, f64> = BTreeMap::new();
    for (id, s) in a.into_iter().chain(b) {
        *union.entry(id).or_insert(0.0) += s;
    }
    let combined = union.into_iter().map(|(id, s)| ScoredItem::new(id.clone(), s / 2.0)).collect();
    Ok(top_k(combined, k))
}

/// Snapshots for one listing type, pinned for the duration of a request.
#[derive(Clone, Debug, Default)]
pub struct ModelSet {
    pub cohorts: Option<Arc<Versioned<CohortSnapshot>>>,
    pub content_short: Option<Arc<Versioned<ContentSnapshot>>>,
    pub content_long: Option<Arc<Versioned<ContentSnapshot>>>,
    pub collab: Option<Arc<Versioned<FactorModel>>>,
}

impl ModelSet {
    /// Versions of every pinned artifact, keyed by kind.
    pub fn versions(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        let mut put = |kind: ArtifactKind, v: Option<&str>| {
            if let Some(v) = v {
                out.insert(kind.as_str().to_string(), v.to_string());
            }
        };
        put(ArtifactKind::Cohorts, self.cohorts.as_ref().map(|s| s.version.as_str()));
        put(ArtifactKind::ContentShort, self.content_short.as_ref().map(|s| s.version.as_str()));
        put(ArtifactKind::ContentLong, self.content_long.as_ref().map(|s| s.version.as_str()));
        put(ArtifactKind::Collab, self.collab.as_ref().map(|s| s.version.as_str()));
        out
    }

    pub fn activity_state(&self, user: &UserId, summary: Option<ActivitySummary>) -> UserActivityState {
        UserActivityState {
            user_id: user.clone(),
            first_event_at: summary.map(|s| s.first_event_at),
            last_event_at: summary.map(|s| s.last_event_at),
            distinct_properties: summary.map_or(0, |s| s.distinct_properties),
            covered_by_last_als: self.collab.as_ref().is_some_and(|m| m.value.covers(user)),
            has_short_term_profile: self.content_short.as_ref().is_some_and(|s| s.value.has_profile(user)),
            has_long_term_profile: self.content_long.as_ref().is_some_and(|s| s.value.has_profile(user)),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("{0} snapshot is not published")]
    Missing(ArtifactKind),
    #[error(transparent)]
    Content(#[from] ContentError),
    #[error("collaborative model: {0}")]
    Collab(String),
    #[error("cold start: no cohort matches in locality or city")]
    ColdStart,
    #[error(transparent)]
    Hybrid(#[from] OrchestratorError),
}

impl From<CollabError> for ModelError {
    fn from(e: CollabError) -> Self {
        ModelError::Collab(e.to_string())
    }
}

/// Everything needed to run a model besides the snapshots.
pub struct RequestContext<'a> {
    pub user_id: &'a UserId,
    pub filter: &'a SearchFilter,
    pub now: Timestamp,
    pub catalog: &'a Catalog,
    pub config: &'a EngineConfig,
}

fn content_full(snap: Option<&Arc<Versioned<ContentSnapshot>>>, kind: ArtifactKind, ctx: &RequestContext<'_>) -> Result<Vec<ScoredItem>, ModelError> {
    let snap = &snap.ok_or(ModelError::Missing(kind))?.value;
    let profile = snap.profile(ctx.user_id).ok_or_else(|| ContentError::NoProfile(ctx.user_id.clone()))?;
    let scored = snap.score_all(ctx.user_id, profile, ctx.filter);
    if scored.is_empty() {
        return Err(ContentError::NoCandidates.into());
    }
    Ok(scored)
}

fn collab_full(models: &ModelSet, ctx: &RequestContext<'_>) -> Result<Vec<ScoredItem>, ModelError> {
    let model = &models.collab.as_ref().ok_or(ModelError::Missing(ArtifactKind::Collab))?.value;
    let scored = model.score_all(ctx.user_id, ctx.filter, ctx.catalog)?;
    if scored.is_empty() {
        return Err(CollabError::NoCandidates.into());
    }
    Ok(scored)
}

/// Runs one model directly, without routing. Deterministic in its inputs,
/// which lets an auditor recompute a served response from the versions it
/// reports.
pub fn run_model(model: ModelUsed, models: &ModelSet, ctx: &RequestContext<'_>) -> Result<Vec<ScoredItem>, ModelError> {
    let k = ctx.filter.top_k;
    match model {
        ModelUsed::ColdStart => {
            let snap = &models.cohorts.as_ref().ok_or(ModelError::Missing(ArtifactKind::Cohorts))?.value;
            let seed = request_seed(ctx.config.rng_seed, ctx.user_id.as_str(), ctx.now);
            let n = cohorts_for_page(k);
            recommend_cold_start(ctx.filter, snap, seed, n, CohortScope::Locality)
                .or_else(|_| recommend_cold_start(ctx.filter, snap, seed, n, CohortScope::City))
                .map_err(|_| ModelError::ColdStart)
        }
        ModelUsed::ContentShort => Ok(top_k(content_full(models.content_short.as_ref(), ArtifactKind::ContentShort, ctx)?, k)),
        ModelUsed::ContentLong => Ok(top_k(content_full(models.content_long.as_ref(), ArtifactKind::ContentLong, ctx)?, k)),
        ModelUsed::Collab => Ok(top_k(collab_full(models, ctx)?, k)),
        ModelUsed::Hybrid => {
            let short = content_full(models.content_short.as_ref(), ArtifactKind::ContentShort, ctx)?;
            let long = collab_full(models, ctx)
                .or_else(|_| content_full(models.content_long.as_ref(), ArtifactKind::ContentLong, ctx))?;
            Ok(combine_hybrid(&short, &long, k)?)
        }
    }
}

/// Models tried for a category, best first. Cold start ends every chain.
pub fn fallback_chain(category: UserCategory) -> &'static [ModelUsed] {
    use ModelUsed::*;
    match category {
        UserCategory::ColdStart => &[ColdStart],
        UserCategory::ShortTerm => &[ContentShort, ColdStart],
        UserCategory::LongTerm => &[Collab, ContentLong, ContentShort, ColdStart],
        UserCategory::ShortLongTerm => &[Hybrid, Collab, ContentLong, ContentShort, ColdStart],
    }
}

/// Classifies, dispatches down the fallback chain and reports what served.
/// Never fails: when even city-wide cold start is empty the response has no
/// items and carries a reason.
pub fn recommend(
    ctx: &RequestContext<'_>,
    models: &ModelSet,
    summary: Option<ActivitySummary>,
) -> RecommendationResponse {
    let started = Instant::now();
    let state = models.activity_state(ctx.user_id, summary);
    let category = classify_user(&state, ctx.now, ctx.config);
    let mut last_error = None;
    let mut served = None;
    for &model in fallback_chain(category) {
        match run_model(model, models, ctx) {
            Ok(items) if !items.is_empty() => {
                served = Some((model, items));
                break;
            }
            Ok(_) => last_error = Some(format!("{model} returned no items")),
            Err(e) => {
                tracing::debug!(user = %ctx.user_id, %model, error = %e, "falling back");
                last_error = Some(e.to_string());
            }
        }
    }
    let (model_used, items, reason) = match served {
        Some((m, items)) => (m, items, None),
        None => (ModelUsed::ColdStart, Vec::new(), Some(format!("no_results: {}", last_error.unwrap_or_default()))),
    };
    RecommendationResponse {
        user_id: ctx.user_id.clone(),
        category,
        model_used,
        items,
        served_at: ctx.now,
        latency_ms: started.elapsed().as_secs_f64() * 1e3,
        reason,
        snapshots: models.versions(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{HOUR_MS, MINUTE_MS, DAY_MS};

    fn state(first: i64, last: i64, distinct: usize, als: bool, short: bool) -> UserActivityState {
        UserActivityState {
            user_id: "u".into(),
            first_event_at: Some(first),
            last_event_at: Some(last),
            distinct_properties: distinct,
            covered_by_last_als: als,
            has_short_term_profile: short,
            has_long_term_profile: false,
        }
    }

    #[test]
    fn golden_decision_table() {
        use UserCategory::*;
        let c = EngineConfig::default();
        let now = 100 * DAY_MS;
        let rows: [(&str, UserActivityState, UserCategory); 12] = [
            ("no events", UserActivityState::empty("u".into()), ColdStart),
            ("5 min of history", state(now - 5 * MINUTE_MS, now, 1, false, true), ColdStart),
            ("exactly 10 min of history", state(now - 10 * MINUTE_MS, now, 1, false, true), ShortTerm),
            ("just under 10 min", state(now - 10 * MINUTE_MS + 1, now, 1, false, true), ColdStart),
            ("inactive 30 days", state(now - 31 * DAY_MS, now - 30 * DAY_MS, 9, true, false), ColdStart),
            ("inactive exactly 28 days", state(now - 29 * DAY_MS, now - 28 * DAY_MS, 2, false, false), ShortTerm),
            ("inactive 28 days + 1 ms", state(now - 29 * DAY_MS, now - 28 * DAY_MS - 1, 9, true, false), ColdStart),
            ("active 3 h, 6 props, ALS, fresh profile", state(now - 3 * HOUR_MS, now, 6, true, true), ShortLongTerm),
            ("active exactly 2 h, 5 props, no profile", state(now - 2 * HOUR_MS, now, 5, true, false), LongTerm),
            ("active 2 h - 1 ms, 9 props", state(now - 2 * HOUR_MS + 1, now, 9, true, true), ShortTerm),
            ("active exactly 4 h, ALS, fresh profile", state(now - 4 * HOUR_MS, now, 7, true, true), LongTerm),
            ("active 3 h, 4 props, no long-term model", state(now - 3 * HOUR_MS, now, 4, false, true), ShortTerm),
        ];
        for (name, s, expected) in rows {
            assert_eq!(classify_user(&s, now, &c), expected, "{name}");
        }
    }

    #[test]
    fn long_term_profile_enables_hybrid() {
        let c = EngineConfig::default();
        let now = 10 * DAY_MS;
        let mut s = state(now - 3 * HOUR_MS, now, 6, false, true);
        assert_eq!(classify_user(&s, now, &c), UserCategory::LongTerm);
        s.has_long_term_profile = true;
        assert_eq!(classify_user(&s, now, &c), UserCategory::ShortLongTerm);
    }

    fn items(pairs: &[(&str, f64)]) -> Vec<ScoredItem> {
        pairs.iter().map(|&(id, s)| ScoredItem::new(id.into(), s)).collect()
    }

    #[test]
    fn hybrid_hand_oracle() {
        // content a:0.9 b:0.5 c:0.1 -> 1, 0.5, 0; collab b:30 c:20 d:10 -> 1, 0.5, 0
        let content = items(&[("a", 0.9), ("b", 0.5), ("c", 0.1)]);
        let collab = items(&[("b", 30.0), ("c", 20.0), ("d", 10.0)]);
        let out = combine_hybrid(&content, &collab, 10).unwrap();
        let expect = items(&[("b", 0.75), ("a", 0.5), ("c", 0.25), ("d", 0.0)]);
        assert_eq!(out.len(), expect.len());
        for (o, e) in out.iter().zip(&expect) {
            assert_eq!(o.property_id, e.property_id);
            assert!((o.score - e.score).abs() < 1e-12);
        }
    }

    #[test]
    fn hybrid_single_side_and_mean() {
        let out = combine_hybrid(&items(&[("a", 3.0)]), &[], 6).unwrap();
        assert_eq!(out, items(&[("a", 0.5)]));
        let content = items(&[("p", 0.8), ("lo", 0.0), ("hi", 1.0)]);
        let collab = items(&[("p", 0.6), ("lo", 0.0), ("hi", 1.0)]);
        let out = combine_hybrid(&content, &collab, 6).unwrap();
        let p = out.iter().find(|i| i.property_id.as_str() == "p").unwrap();
        assert!((p.score - 0.7).abs() < 1e-12);
        assert_eq!(combine_hybrid(&[], &[], 6), Err(OrchestratorError::BothEmpty));
    }

    #[test]
    fn hybrid_affine_invariance() {
        let content = items(&[("a", 0.9), ("b", 0.5), ("c", 0.1), ("e", 0.3)]);
        let collab = items(&[("b", 3.0), ("c", 2.0), ("d", -1.0)]);
        let moved: Vec<ScoredItem> = collab.iter().map(|i| ScoredItem::new(i.property_id.clone(), 7.0 * i.score + 40.0)).collect();
        let ids = |v: Vec<ScoredItem>| v.into_iter().map(|i| i.property_id).collect::<Vec<_>>();
        assert_eq!(ids(combine_hybrid(&content, &collab, 6).unwrap()), ids(combine_hybrid(&content, &moved, 6).unwrap()));
    }
}
