use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::weighting::{adjusted_event_weight, CorpusStats, WeightingScheme};
use super::CollabError;
use crate::domain::{InteractionEvent, ListingType, PropertyId, Timestamp, UserId};

/// How several events on one (user, property) pair combine.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Max,
    Sum,
}

/// Sparse user by property score matrix with dense, sorted indices.
#[derive(Clone, Debug, PartialEq)]
pub struct InteractionMatrix {
    pub listing_type: ListingType,
    pub scheme: WeightingScheme,
    pub reference_time: Timestamp,
    pub users: Vec<UserId>,
    pub properties: Vec<PropertyId>,
    /// `(row, col, value)` sorted by row then column, one per pair.
    pub entries: Vec<(u32, u32, f64)>,
}

#[derive(Clone, Copy, Debug)]
pub struct MatrixParams {
    pub listing_type: ListingType,
    pub scheme: WeightingScheme,
    pub aggregation: Aggregation,
    pub reference_time: Timestamp,
    pub min_distinct_properties: usize,
}

impl InteractionMatrix {
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn value(&self, user: &UserId, property: &PropertyId) -> Option<f64> {
        let row = self.users.binary_search(user).ok()? as u32;
        let col = self.properties.binary_search(property).ok()? as u32;
        self.entries
            .binary_search_by(|&(r, c, _)| (r, c).cmp(&(row, col)))
            .ok()
            .map(|i| self.entries[i].2)
    }

    /// Entries as `(user, property) -> value`, for comparisons in tests.
    pub fn to_map(&self) -> BTreeMap<(UserId, PropertyId), f64> {
        self.entries
            .iter()
            .map(|&(r, c, v)| ((self.users[r as usize].clone(), self.properties[c as usize].clone()), v))
            .collect()
    }
}

/// Users with fewer than `min_distinct_properties` distinct properties are
/// dropped. Pairs whose adjusted value is zero are left out, so a property
/// holding every interaction vanishes under TF-IDF.
pub fn build_matrix(events: &[InteractionEvent], params: &MatrixParams) -> Result<InteractionMatrix, CollabError> {
    let events: Vec<&InteractionEvent> = events.iter().filter(|e| e.listing_type == params.listing_type).collect();
    let stats = match params.scheme {
        WeightingScheme::TfIdf => Some(CorpusStats::from_events(events.iter().copied())),
        _ => None,
    };

    let mut per_user: BTreeMap<&UserId, BTreeSet<&PropertyId>> = BTreeMap::new();
    for e in &events {
        per_user.entry(&e.user_id).or_default().insert(&e.property_id);
    }
    let eligible: BTreeSet<&UserId> = per_user
        .into_iter()
        .filter(|(_, props)| props.len() >= params.min_distinct_properties)
        .map(|(u, _)| u)
        .collect();

    let mut pairs: BTreeMap<(&UserId, &PropertyId), f64> = BTreeMap::new();
    for e in &events {
        if !eligible.contains(&e.user_id) {
            continue;
        }
        let w = adjusted_event_weight(e, params.scheme, params.reference_time, stats.as_ref())?;
        let slot = pairs.entry((&e.user_id, &e.property_id)).or_insert(0.0);
        *slot = match params.aggregation {
            Aggregation::Max => slot.max(w),
            Aggregation::Sum => *slot + w,
        };
    }
    pairs.retain(|_, v| *v > 0.0);
    if pairs.is_empty() {
        return Err(CollabError::EmptyMatrix);
    }

    let users: Vec<UserId> = pairs.keys().map(|(u, _)| (*u).clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let properties: Vec<PropertyId> =
        pairs.keys().map(|(_, p)| (*p).clone()).collect::<BTreeSet<_>>().into_iter().collect();
    let mut entries: Vec<(u32, u32, f64)> = pairs
        .into_iter()
        .map(|((u, p), v)| {
            let row = users.binary_search(u).expect("user index") as u32;
            let col = properties.binary_search(p).expect("property index") as u32;
            (row, col, v)
        })
        .collect();
    entries.sort_by_key(|&(r, c, _)| (r, c));

    Ok(InteractionMatrix {
        listing_type: params.listing_type,
        scheme: params.scheme,
        reference_time: params.reference_time,
        users,
        properties,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Action;

    fn ev(user: &str, p: &str, action: Action, ts: Timestamp) -> InteractionEvent {
        InteractionEvent {
            timestamp: ts,
            user_id: user.into(),
            property_id: p.into(),
            action,
            listing_type: ListingType::Rent,
        }
    }

    fn params(scheme: WeightingScheme, min: usize) -> MatrixParams {
        MatrixParams {
            listing_type: ListingType::Rent,
            scheme,
            aggregation: Aggregation::Max,
            reference_time: 1_000,
            min_distinct_properties: min,
        }
    }

    #[test]
    fn crf_then_scroll_keeps_ten() {
        let events = [ev("u", "p", Action::SubmittedCrf, 1), ev("u", "p", Action::PageScrollOrRating, 2)];
        let m = build_matrix(&events, &params(WeightingScheme::Linear, 1)).unwrap();
        assert_eq!(m.value(&"u".into(), &"p".into()), Some(10.0));
        let only_scroll = [ev("u", "p", Action::PageScrollOrRating, 2)];
        let m = build_matrix(&only_scroll, &params(WeightingScheme::Linear, 1)).unwrap();
        assert_eq!(m.value(&"u".into(), &"p".into()), Some(1.0));
    }

    #[test]
    fn three_by_four_matches_hand_oracle() {
        use Action::*;
        let events = [
            ev("u1", "p1", ImpressionDetail, 1),
            ev("u1", "p1", DetailPageEngagement, 2),
            ev("u1", "p3", OtpVerified, 3),
            ev("u2", "p2", PageScrollOrRating, 4),
            ev("u2", "p4", OpenedOrFilledCrf, 5),
            ev("u2", "p4", SubmittedCrf, 6),
            ev("u2", "p4", ImpressionDetail, 7),
            ev("u3", "p1", PageScrollOrRating, 8),
            ev("u3", "p2", ImpressionDetail, 9),
            ev("u3", "p3", DetailPageEngagement, 10),
            ev("u3", "p4", OtpVerified, 11),
        ];
        let m = build_matrix(&events, &params(WeightingScheme::Linear, 1)).unwrap();
        let expect: BTreeMap<(UserId, PropertyId), f64> = [
            ("u1", "p1", 4.0),
            ("u1", "p3", 8.0),
            ("u2", "p2", 1.0),
            ("u2", "p4", 10.0),
            ("u3", "p1", 1.0),
            ("u3", "p2", 2.0),
            ("u3", "p3", 4.0),
            ("u3", "p4", 8.0),
        ]
        .into_iter()
        .map(|(u, p, v)| ((UserId::from(u), PropertyId::from(p)), v))
        .collect();
        assert_eq!(m.to_map(), expect);
        assert_eq!(m.users.len(), 3);
        assert_eq!(m.properties.len(), 4);
    }

    #[test]
    fn sparse_users_dropped_and_empty_is_error() {
        let events: Vec<_> = (0..4).map(|i| ev("u", &format!("p{i}"), Action::ImpressionDetail, i)).collect();
        assert!(matches!(build_matrix(&events, &params(WeightingScheme::Linear, 5)), Err(CollabError::EmptyMatrix)));
        let mut more = events.clone();
        more.push(ev("u", "p4", Action::ImpressionDetail, 9));
        assert_eq!(build_matrix(&more, &params(WeightingScheme::Linear, 5)).unwrap().nnz(), 5);
    }

    #[test]
    fn sum_aggregation_accumulates() {
        let events = [ev("u", "p", Action::SubmittedCrf, 1), ev("u", "p", Action::PageScrollOrRating, 2)];
        let mut p = params(WeightingScheme::Linear, 1);
        p.aggregation = Aggregation::Sum;
        assert_eq!(build_matrix(&events, &p).unwrap().value(&"u".into(), &"p".into()), Some(11.0));
    }

    #[test]
    fn zero_age_decay_equals_linear() {
        let events: Vec<_> = (0..6).map(|i| ev("u", &format!("p{i}"), Action::ALL[i % 6], 1_000)).collect();
        let lin = build_matrix(&events, &params(WeightingScheme::Linear, 1)).unwrap();
        let dec = build_matrix(&events, &params(WeightingScheme::exponential_decay(), 1)).unwrap();
        assert_eq!(lin.entries, dec.entries);
    }
}
