//! Content-filtering snapshots and cosine ranking.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Action, ApartmentType, InteractionEvent, ListingType, Property, PropertyId, SearchFilter, Timestamp, UserId,
};
use crate::features::{
    build_user_profile, cosine_with_norms, featurize_property, FeatureSpace, PropertyVectors, SparseFeatureVector,
};
use crate::response::{top_k, ScoredItem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    /// Trailing short window (10 minutes in production).
    ShortTerm,
    /// Full training window, restricted to users with enough distinct properties.
    LongTerm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexedProperty {
    pub id: PropertyId,
    pub apartment_type: ApartmentType,
    pub price: u64,
    pub built_up_area: f64,
    pub vector: SparseFeatureVector,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContentSnapshot {
    pub listing_type: ListingType,
    pub horizon: Horizon,
    pub window: (Timestamp, Timestamp),
    pub built_at: Timestamp,
    pub space: FeatureSpace,
    pub profiles: BTreeMap<UserId, SparseFeatureVector>,
    /// Properties each user submitted a CRF on inside the window.
    pub converted: BTreeMap<UserId, BTreeSet<PropertyId>>,
    /// Sorted by id.
    pub properties: Vec<IndexedProperty>,
    /// Locality to indexes into `properties`, each list in id order.
    pub candidates: BTreeMap<String, Vec<u32>>,
    pub skipped_events: usize,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContentError {
    #[error("user {0} has no profile in this snapshot")]
    NoProfile(UserId),
    #[error("no candidate properties match the filter")]
    NoCandidates,
}

struct VectorIndex<'a>(HashMap<&'a PropertyId, &'a SparseFeatureVector>);

impl PropertyVectors for VectorIndex<'_> {
    fn vector(&self, id: &PropertyId) -> Option<&SparseFeatureVector> {
        self.0.get(id).copied()
    }
}

/// Settings for a snapshot build.
#[derive(Clone, Debug)]
pub struct ContentTraining<'a> {
    pub horizon: Horizon,
    pub window: (Timestamp, Timestamp),
    pub built_at: Timestamp,
    pub space: &'a FeatureSpace,
    /// Long-term snapshots only profile users with at least this many
    /// distinct properties in the window.
    pub min_distinct_properties: usize,
}

type Profiles = (BTreeMap<UserId, SparseFeatureVector>, BTreeMap<UserId, BTreeSet<PropertyId>>, usize);

fn build_profiles(events: &[InteractionEvent], index: &VectorIndex<'_>, params: &ContentTraining<'_>) -> Profiles {
    let space = params.space;
    let listing_type = space.listing_type();
    let (start, end) = params.window;
    let mut by_user: BTreeMap<&UserId, Vec<&InteractionEvent>> = BTreeMap::new();
    for e in events {
        if e.listing_type == listing_type && e.timestamp >= start && e.timestamp < end {
            by_user.entry(&e.user_id).or_default().push(e);
        }
    }
    let mut profiles = BTreeMap::new();
    let mut converted: BTreeMap<UserId, BTreeSet<PropertyId>> = BTreeMap::new();
    let mut skipped = 0;
    for (user, user_events) in by_user {
        if params.horizon == Horizon::LongTerm {
            let distinct: BTreeSet<&PropertyId> = user_events.iter().map(|e| &e.property_id).collect();
            if distinct.len() < params.min_distinct_properties {
                continue;
            }
        }
        let built = build_user_profile(user_events.iter().copied(), index, space);
        skipped += built.skipped;
        if built.profile.is_zero() {
            continue;
        }
        let crf: BTreeSet<PropertyId> = user_events
            .iter()
            .filter(|e| e.action == Action::SubmittedCrf)
            .map(|e| e.property_id.clone())
            .collect();
        if !crf.is_empty() {
            converted.insert(user.clone(), crf);
        }
        profiles.insert(user.clone(), built.profile);
    }
    (profiles, converted, skipped)
}

/// Builds profiles for every user with events in the window and indexes all
/// active properties of the space's listing type.
pub fn train_content_snapshot<'p>(
    events: &[InteractionEvent],
    properties: impl IntoIterator<Item = &'p Property>,
    params: &ContentTraining<'_>,
) -> ContentSnapshot {
    let space = params.space;
    let listing_type = space.listing_type();

    let mut indexed: Vec<IndexedProperty> = properties
        .into_iter()
        .filter(|p| p.active && p.listing_type == listing_type)
        .filter_map(|p| {
            let vector = featurize_property(p, space).ok()?;
            Some((p, vector))
        })
        .map(|(p, vector)| IndexedProperty {
            id: p.id.clone(),
            apartment_type: p.apartment_type,
            price: p.price,
            built_up_area: p.built_up_area,
            norm: vector.norm(),
            vector,
        })
        .collect();
    indexed.sort_by(|a, b| a.id.cmp(&b.id));
    indexed.dedup_by(|a, b| a.id == b.id);

    let index = VectorIndex(indexed.iter().map(|p| (&p.id, &p.vector)).collect());
    let (profiles, converted, skipped_events) = build_profiles(events, &index, params);
    drop(index);

    ContentSnapshot {
        listing_type,
        horizon: params.horizon,
        window: params.window,
        built_at: params.built_at,
        space: space.clone(),
        profiles,
        converted,
        properties: indexed,
        candidates: BTreeMap::new(),
        skipped_events,
    }
}

impl ContentSnapshot {
    /// Rebuilds profiles over new events while reusing this snapshot's
    /// property index, which skips featurizing the catalog again.
    pub fn retrained(&self, events: &[InteractionEvent], params: &ContentTraining<'_>) -> ContentSnapshot {
        let index = VectorIndex(self.properties.iter().map(|p| (&p.id, &p.vector)).collect());
        let (profiles, converted, skipped_events) = build_profiles(events, &index, params);
        ContentSnapshot {
            listing_type: self.listing_type,
            horizon: params.horizon,
            window: params.window,
            built_at: params.built_at,
            space: self.space.clone(),
            profiles,
            converted,
            properties: self.properties.clone(),
            candidates: self.candidates.clone(),
            skipped_events,
        }
    }

    /// Attaches the locality candidate index. Separate from training because
    /// [`IndexedProperty`] does not carry locality.
    pub fn with_candidates<'p>(mut self, properties: impl IntoIterator<Item = &'p Property>) -> Self {
        let mut candidates: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for p in properties {
            if let Ok(i) = self.properties.binary_search_by(|q| q.id.cmp(&p.id)) {
                candidates.entry(p.locality.clone()).or_default().push(i as u32);
            }
        }
        for list in candidates.values_mut() {
            list.sort_unstable();
            list.dedup();
        }
        self.candidates = candidates;
        self
    }

    pub fn property(&self, id: &PropertyId) -> Option<&IndexedProperty> {
        self.properties.binary_search_by(|q| q.id.cmp(id)).ok().map(|i| &self.properties[i])
    }

    pub fn profile(&self, user: &UserId) -> Option<&SparseFeatureVector> {
        self.profiles.get(user)
    }

    pub fn has_profile(&self, user: &UserId) -> bool {
        self.profiles.contains_key(user)
    }

    /// Candidates in the filter's locality that pass its attribute predicates,
    /// in id order.
    pub fn candidates_for<'a>(&'a self, filter: &'a SearchFilter) -> impl Iterator<Item = &'a IndexedProperty> + 'a {
        let list = if filter.listing_type == self.listing_type { self.candidates.get(&filter.locality) } else { None };
        list.into_iter()
            .flatten()
            .map(move |&i| &self.properties[i as usize])
            .filter(move |p| filter.admits_attributes(p.apartment_type, p.price, p.built_up_area))
    }

    /// Every admissible candidate scored against `profile`, unsorted.
    pub fn score_all(&self, user: &UserId, profile: &SparseFeatureVector, filter: &SearchFilter) -> Vec<ScoredItem> {
        let norm = profile.norm();
        let excluded = self.converted.get(user);
        self.candidates_for(filter)
            .filter(|p| excluded.is_none_or(|set| !set.contains(&p.id)))
            .map(|p| ScoredItem::new(p.id.clone(), cosine_with_norms(profile, norm, &p.vector, p.norm)))
            .collect()
    }
}

/// Top `filter.top_k` candidates by cosine similarity to the user's profile.
pub fn recommend_content(
    user_id: &UserId,
    filter: &SearchFilter,
    snap: &ContentSnapshot,
) -> Result<Vec<ScoredItem>, ContentError> {
    let profile = snap.profile(user_id).ok_or_else(|| ContentError::NoProfile(user_id.clone()))?;
    let scored = snap.score_all(user_id, profile, filter);
    if scored.is_empty() {
        return Err(ContentError::NoCandidates);
    }
    Ok(top_k(scored, filter.top_k))
}

/// Trains and indexes in one step.
pub fn build_content_snapshot(
    events: &[InteractionEvent],
    properties: &[&Property],
    params: &ContentTraining<'_>,
) -> ContentSnapshot {
    train_content_snapshot(events, properties.iter().copied(), params)
        .with_candidates(properties.iter().copied())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Furnishing, ProfileType};
    use crate::features::BinConfig;

    fn prop(id: &str, apt: ApartmentType, price: u64, floor: u32) -> Property {
        Property {
            id: id.into(),
            city: "Pune".into(),
            locality: "Baner".into(),
            apartment_type: apt,
            furnishing: Furnishing::Semi,
            profile_type: ProfileType::Owner,
            price,
            built_up_area: 1000.0,
            age_years: 1.0,
            floor_number: floor,
            image_count: 3,
            listing_type: ListingType::Buy,
            created_at: 0,
            active: true,
        }
    }

    fn ev(user: &str, p: &str, action: Action, ts: Timestamp) -> InteractionEvent {
        InteractionEvent {
            timestamp: ts,
            user_id: user.into(),
            property_id: p.into(),
            action,
            listing_type: ListingType::Buy,
        }
    }

    fn params(space: &FeatureSpace, horizon: Horizon) -> ContentTraining<'_> {
        ContentTraining { horizon, window: (0, 600_000), built_at: 600_000, space, min_distinct_properties: 5 }
    }

    #[test]
    fn empty_window_keeps_property_index() {
        let space = FeatureSpace::new(ListingType::Buy, BinConfig::default());
        let props = [prop("a", ApartmentType::Bhk1, 1_000_000, 1), prop("b", ApartmentType::Bhk2, 2_000_000, 2)];
        let refs: Vec<&Property> = props.iter().collect();
        let snap = build_content_snapshot(&[], &refs, &params(&space, Horizon::ShortTerm));
        assert!(snap.profiles.is_empty());
        assert_eq!(snap.properties.len(), 2);
        assert_eq!(snap.candidates["Baner"].len(), 2);
    }

    #[test]
    fn single_crf_profile_and_exclusion() {
        let space = FeatureSpace::new(ListingType::Buy, BinConfig::default());
        let props = [prop("a", ApartmentType::Bhk1, 1_000_000, 1), prop("b", ApartmentType::Bhk1, 1_000_000, 1)];
        let refs: Vec<&Property> = props.iter().collect();
        let events = [ev("u", "a", Action::SubmittedCrf, 10)];
        let snap = build_content_snapshot(&events, &refs, &params(&space, Horizon::ShortTerm));
        let u = UserId::new("u");
        assert_eq!(snap.profiles[&u], snap.property(&"a".into()).unwrap().vector.scaled(10.0));
        let items = recommend_content(&u, &SearchFilter::new("Pune", "Baner", ListingType::Buy), &snap).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].property_id.as_str(), "b");
    }

    #[test]
    fn identity_beats_orthogonal() {
        let space = FeatureSpace::new(ListingType::Buy, BinConfig::default());
        let mut q = prop("q", ApartmentType::Bhk4, 30_000_000, 20);
        q.furnishing = Furnishing::Fully;
        q.built_up_area = 4000.0;
        q.age_years = 30.0;
        q.image_count = 30;
        let props = [prop("p", ApartmentType::Bhk1, 1_000_000, 1), q];
        let refs: Vec<&Property> = props.iter().collect();
        let events = [ev("u", "p", Action::DetailPageEngagement, 5)];
        let snap = build_content_snapshot(&events, &refs, &params(&space, Horizon::ShortTerm));
        let items =
            recommend_content(&"u".into(), &SearchFilter::new("Pune", "Baner", ListingType::Buy), &snap).unwrap();
        assert_eq!(items[0].property_id.as_str(), "p");
        assert!((items[0].score - 1.0).abs() < 1e-12);
        assert_eq!(items[1], ScoredItem::new("q".into(), 0.0));
    }

    #[test]
    fn errors() {
        let space = FeatureSpace::new(ListingType::Buy, BinConfig::default());
        let props = [prop("a", ApartmentType::Bhk1, 1_000_000, 1)];
        let refs: Vec<&Property> = props.iter().collect();
        let events = [ev("u", "a", Action::ImpressionDetail, 5)];
        let snap = build_content_snapshot(&events, &refs, &params(&space, Horizon::ShortTerm));
        let f = SearchFilter::new("Pune", "Baner", ListingType::Buy);
        assert_eq!(recommend_content(&"nobody".into(), &f, &snap), Err(ContentError::NoProfile("nobody".into())));
        let mut narrow = f.clone();
        narrow.apartment_type = Some(ApartmentType::Bhk3);
        assert_eq!(recommend_content(&"u".into(), &narrow, &snap), Err(ContentError::NoCandidates));
    }

    #[test]
    fn long_term_requires_distinct_properties() {
        let space = FeatureSpace::new(ListingType::Buy, BinConfig::default());
        let props: Vec<Property> =
            (0..6).map(|i| prop(&format!("p{i}"), ApartmentType::Bhk2, 1_000_000 * (i + 1), 1)).collect();
        let refs: Vec<&Property> = props.iter().collect();
        let mut events: Vec<InteractionEvent> =
            (0..5).map(|i| ev("wide", &format!("p{i}"), Action::PageScrollOrRating, i as i64)).collect();
        events.extend((0..4).map(|i| ev("narrow", &format!("p{i}"), Action::PageScrollOrRating, i as i64)));
        let snap = build_content_snapshot(&events, &refs, &params(&space, Horizon::LongTerm));
        assert!(snap.has_profile(&"wide".into()));
        assert!(!snap.has_profile(&"narrow".into()));
    }

    #[test]
    fn events_outside_window_are_ignored() {
        let space = FeatureSpace::new(ListingType::Buy, BinConfig::default());
        let props = [prop("a", ApartmentType::Bhk1, 1_000_000, 1)];
        let refs: Vec<&Property> = props.iter().collect();
        let events = [ev("late", "a", Action::SubmittedCrf, 600_000)];
        let snap = build_content_snapshot(&events, &refs, &params(&space, Horizon::ShortTerm));
        assert!(snap.profiles.is_empty());
    }
}
