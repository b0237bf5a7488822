use std::collections::{HashMap, HashSet};

use parking_lot::RwLock;

use crate::domain::{EventRejection, InteractionEvent, PropertyId, Timestamp, UserId};
use crate::orchestrator::ActivitySummary;

#[derive(Clone, Debug, Default)]
struct Lifecycle {
    first: Timestamp,
    last: Timestamp,
    properties: HashSet<PropertyId>,
}

/// Per-user history summary for routing, updated on every append. A gap
/// longer than `inactivity_reset` starts a new lifecycle.
pub struct ActivityIndex {
    inactivity_reset: i64,
    users: RwLock<HashMap<UserId, Lifecycle>>,
}

impl ActivityIndex {
    pub fn new(inactivity_reset_ms: i64) -> Self {
        ActivityIndex { inactivity_reset: inactivity_reset_ms, users: RwLock::new(HashMap::new()) }
    }

    /// Rejects an event older than the user's latest one.
    pub fn check_order(&self, event: &InteractionEvent) -> Result<(), EventRejection> {
        match self.users.read().get(&event.user_id) {
            Some(l) if event.timestamp < l.last => Err(EventRejection::OutOfOrder {
                user: event.user_id.clone(),
                ts: event.timestamp,
                last: l.last,
            }),
            _ => Ok(()),
        }
    }

    pub fn record(&self, event: &InteractionEvent) {
        let mut users = self.users.write();
        Self::record_into(&mut users, event, self.inactivity_reset);
    }

    pub fn record_all<'a>(&self, events: impl IntoIterator<Item = &'a InteractionEvent>) {
        let mut users = self.users.write();
        for e in events {
            Self::record_into(&mut users, e, self.inactivity_reset);
        }
    }

    fn record_into(users: &mut HashMap<UserId, Lifecycle>, e: &InteractionEvent, reset: i64) {
        let l = users.entry(e.user_id.clone()).or_insert_with(|| Lifecycle {
            first: e.timestamp,
            last: e.timestamp,
            properties: HashSet::new(),
        });
        if e.timestamp - l.last > reset {
            l.first = e.timestamp;
            l.properties.clear();
        }
        l.first = l.first.min(e.timestamp);
        l.last = l.last.max(e.timestamp);
        l.properties.insert(e.property_id.clone());
    }

    pub fn summary(&self, user: &UserId) -> Option<ActivitySummary> {
        self.users.read().get(user).map(|l| ActivitySummary {
            first_event_at: l.first,
            last_event_at: l.last,
            distinct_properties: l.properties.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.users.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All known users, sorted.
    pub fn users(&self) -> Vec<UserId> {
        let mut out: Vec<UserId> = self.users.read().keys().cloned().collect();
        out.sort();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Action, ListingType, DAY_MS};

    fn ev(ts: Timestamp, p: &str) -> InteractionEvent {
        InteractionEvent { timestamp: ts, user_id: "u".into(), property_id: p.into(), action: Action::ImpressionDetail, listing_type: ListingType::Buy }
    }

    #[test]
    fn tracks_span_and_distinct() {
        let idx = ActivityIndex::new(28 * DAY_MS);
        idx.record_all(&[ev(10, "a"), ev(20, "b"), ev(30, "a")]);
        assert_eq!(idx.summary(&"u".into()), Some(ActivitySummary { first_event_at: 10, last_event_at: 30, distinct_properties: 2 }));
        assert!(idx.check_order(&ev(29, "c")).is_err());
        assert!(idx.check_order(&ev(30, "c")).is_ok());
    }

    #[test]
    fn long_gap_starts_new_lifecycle() {
        let idx = ActivityIndex::new(28 * DAY_MS);
        idx.record(&ev(0, "a"));
        idx.record(&ev(28 * DAY_MS, "b"));
        assert_eq!(idx.summary(&"u".into()).unwrap().first_event_at, 0);
        idx.record(&ev(56 * DAY_MS + 1, "c"));
        let s = idx.summary(&"u".into()).unwrap();
        assert_eq!((s.first_event_at, s.distinct_properties), (56 * DAY_MS + 1, 1));
    }
}
