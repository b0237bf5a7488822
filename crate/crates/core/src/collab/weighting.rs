use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::CollabError;
use crate::domain::{InteractionEvent, PropertyId, Span, Timestamp};

/// How raw action weights are adjusted before they enter the matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightingScheme {
    Linear,
    /// Halves the weight every `half_life` of event age.
    ExponentialDecay { half_life: Span },
    /// Scales by the log inverse share of interactions the property holds.
    TfIdf,
}

impl WeightingScheme {
    pub const DEFAULT_HALF_LIFE: Span = Span::days(3);

    pub fn exponential_decay() -> Self {
        WeightingScheme::ExponentialDecay { half_life: Self::DEFAULT_HALF_LIFE }
    }

    pub fn name(&self) -> &'static str {
        match self {
            WeightingScheme::Linear => "linear",
            WeightingScheme::ExponentialDecay { .. } => "expdecay",
            WeightingScheme::TfIdf => "tfidf",
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            WeightingScheme::ExponentialDecay { half_life } if !half_life.is_positive() => {
                Err("half_life must be positive".into())
            }
            _ => Ok(()),
        }
    }
}

impl Default for WeightingScheme {
    fn default() -> Self {
        WeightingScheme::Linear
    }
}

impl fmt::Display for WeightingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WeightingScheme {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "linear" => Ok(WeightingScheme::Linear),
            "expdecay" | "exp_decay" | "exponential_decay" => Ok(WeightingScheme::exponential_decay()),
            "tfidf" | "tf_idf" => Ok(WeightingScheme::TfIdf),
            other => Err(format!("unknown weighting scheme {other:?} (linear, expdecay, tfidf)")),
        }
    }
}

/// Interaction counts over the training corpus, used by [`WeightingScheme::TfIdf`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CorpusStats {
    pub total: u64,
    pub per_property: HashMap<PropertyId, u64>,
}

impl CorpusStats {
    pub fn from_events<'a>(events: impl IntoIterator<Item = &'a InteractionEvent>) -> Self {
        let mut stats = CorpusStats::default();
        for e in events {
            stats.total += 1;
            *stats.per_property.entry(e.property_id.clone()).or_default() += 1;
        }
        stats
    }
}

/// Table weight of the event after the scheme's adjustment. Events stamped
/// after `reference_time` are treated as age zero.
pub fn adjusted_event_weight(
    event: &InteractionEvent,
    scheme: WeightingScheme,
    reference_time: Timestamp,
    stats: Option<&CorpusStats>,
) -> Result<f64, CollabError> {
    let w = event.action.weight() as f64;
    match scheme {
        WeightingScheme::Linear => Ok(w),
        WeightingScheme::ExponentialDecay { half_life } => {
            let age = (reference_time - event.timestamp).max(0) as f64;
            Ok(w * 0.5f64.powf(age / half_life.as_millis() as f64))
        }
        WeightingScheme::TfIdf => {
            let stats = stats.ok_or(CollabError::MissingCorpusStats)?;
            let count = stats.per_property.get(&event.property_id).copied().unwrap_or(0);
            if count == 0 || stats.total == 0 {
                return Err(CollabError::MissingCorpusStats);
            }
            Ok(w * tfidf_factor(stats.total, count))
        }
    }
}

/// `ln(total / count)`, never negative.
pub fn tfidf_factor(total: u64, count: u64) -> f64 {
    (total as f64 / count as f64).ln().max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Action, ListingType, DAY_MS};
    use proptest::prelude::*;

    fn ev(action: Action, ts: Timestamp, p: &str) -> InteractionEvent {
        InteractionEvent { timestamp: ts, user_id: "u".into(), property_id: p.into(), action, listing_type: ListingType::Buy }
    }

    #[test]
    fn decay_halves_at_half_life() {
        let e = ev(Action::SubmittedCrf, 0, "p");
        let w = adjusted_event_weight(&e, WeightingScheme::exponential_decay(), 3 * DAY_MS, None).unwrap();
        assert!((w - 5.0).abs() < 1e-12);
        for a in Action::ALL {
            let e = ev(a, 100, "p");
            let w = adjusted_event_weight(&e, WeightingScheme::exponential_decay(), 100, None).unwrap();
            assert_eq!(w, a.weight() as f64);
        }
    }

    #[test]
    fn tfidf_needs_stats() {
        let e = ev(Action::DetailPageEngagement, 0, "p");
        assert!(matches!(adjusted_event_weight(&e, WeightingScheme::TfIdf, 0, None), Err(CollabError::MissingCorpusStats)));
        let mut stats = CorpusStats { total: 1000, ..Default::default() };
        stats.per_property.insert("p".into(), 10);
        let w = adjusted_event_weight(&e, WeightingScheme::TfIdf, 0, Some(&stats)).unwrap();
        // 4 * ln(100), ln(100) = 4.605170185988091 from a calculator.
        assert!((w - 4.0 * 4.605170185988091).abs() < 1e-12);
    }

    #[test]
    fn tfidf_zero_when_one_property_owns_everything() {
        assert_eq!(tfidf_factor(50, 50), 0.0);
    }

    #[test]
    fn scheme_names_parse() {
        for s in [WeightingScheme::Linear, WeightingScheme::exponential_decay(), WeightingScheme::TfIdf] {
            assert_eq!(s.name().parse::<WeightingScheme>().unwrap(), s);
        }
        assert!("bogus".parse::<WeightingScheme>().is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn decay_strictly_decreasing(a in 0i64..(400 * DAY_MS), gap in 1i64..(10 * DAY_MS)) {
            let scheme = WeightingScheme::exponential_decay();
            let now = 500 * DAY_MS;
            let young = adjusted_event_weight(&ev(Action::OtpVerified, now - a, "p"), scheme, now, None).unwrap();
            let old = adjusted_event_weight(&ev(Action::OtpVerified, now - a - gap, "p"), scheme, now, None).unwrap();
            prop_assert!(old < young);
        }

        #[test]
        fn tfidf_grows_as_share_falls(total in 2u64..1_000_000, c in 1u64..1_000_000) {
            let c = c.min(total - 1).max(1);
            prop_assert!(tfidf_factor(total, c) >= tfidf_factor(total, c + 1));
            prop_assert!(tfidf_factor(total, c) > tfidf_factor(total, total));
        }
    }
}
