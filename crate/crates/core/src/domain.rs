//! Shared vocabulary: listings, interaction events, action weights, search
//! filters and user categories.

use std::borrow::Borrow;
use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Milliseconds since the Unix epoch.
pub type Timestamp = i64;

pub const MINUTE_MS: i64 = 60_000;
pub const HOUR_MS: i64 = 60 * MINUTE_MS;
pub const DAY_MS: i64 = 24 * HOUR_MS;

/// A length of time with millisecond resolution.
///
/// Serialized as a compact human string: `500ms`, `30s`, `10m`, `2h`, `28d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Span(i64);

impl Span {
    pub const fn from_millis(ms: i64) -> Self {
        Span(ms)
    }
    pub const fn seconds(s: i64) -> Self {
        Span(s * 1000)
    }
    pub const fn minutes(m: i64) -> Self {
        Span(m * MINUTE_MS)
    }
    pub const fn hours(h: i64) -> Self {
        Span(h * HOUR_MS)
    }
    pub const fn days(d: i64) -> Self {
        Span(d * DAY_MS)
    }
    pub const fn as_millis(self) -> i64 {
        self.0
    }
    pub fn as_days_f64(self) -> f64 {
        self.0 as f64 / DAY_MS as f64
    }
    pub fn is_positive(self) -> bool {
        self.0 > 0
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ms = self.0;
        for (unit, size) in [("d", DAY_MS), ("h", HOUR_MS), ("m", MINUTE_MS), ("s", 1000)] {
            if ms != 0 && ms % size == 0 {
                return write!(f, "{}{}", ms / size, unit);
            }
        }
        write!(f, "{ms}ms")
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("invalid duration {0:?} (expected <int><ms|s|m|h|d>)")]
pub struct ParseSpanError(pub String);

impl FromStr for Span {
    type Err = ParseSpanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let t = s.trim();
        let split = t
            .find(|c: char| !(c.is_ascii_digit() || c == '-'))
            .ok_or_else(|| ParseSpanError(s.to_string()))?;
        let (num, unit) = t.split_at(split);
        let n: i64 = num.parse().map_err(|_| ParseSpanError(s.to_string()))?;
        let scale = match unit.trim() {
            "ms" => 1,
            "s" => 1000,
            "m" | "min" => MINUTE_MS,
            "h" => HOUR_MS,
            "d" => DAY_MS,
            _ => return Err(ParseSpanError(s.to_string())),
        };
        n.checked_mul(scale)
            .map(Span)
            .ok_or_else(|| ParseSpanError(s.to_string()))
    }
}

impl Serialize for Span {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if serializer.is_human_readable() {
            serializer.collect_str(self)
        } else {
            serializer.serialize_i64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Span {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        if deserializer.is_human_readable() {
            let s = String::deserialize(deserializer)?;
            s.parse().map_err(serde::de::Error::custom)
        } else {
            i64::deserialize(deserializer).map(Span)
        }
    }
}

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(id: impl AsRef<str>) -> Self {
                $name(Arc::from(id.as_ref()))
            }
            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Debug::fmt(&*self.0, f)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name::new(s)
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(Arc::from(s))
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Opaque user identifier.
    UserId
);
string_id!(
    /// Opaque property (listing) identifier.
    PropertyId
);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ListingType {
    Buy,
    Rent,
}

impl ListingType {
    pub const ALL: [ListingType; 2] = [ListingType::Buy, ListingType::Rent];

    pub fn as_str(self) -> &'static str {
        match self {
            ListingType::Buy => "buy",
            ListingType::Rent => "rent",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ListingType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ListingType {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "buy" | "purchase" => Ok(ListingType::Buy),
            "rent" => Ok(ListingType::Rent),
            _ => Err(DomainError::UnknownValue { field: "listing_type", value: s.to_string() }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ApartmentType {
    #[serde(rename = "1RK")]
    Rk1,
    #[serde(rename = "1BHK")]
    Bhk1,
    #[serde(rename = "2BHK")]
    Bhk2,
    #[serde(rename = "3BHK")]
    Bhk3,
    #[serde(rename = "4BHK")]
    Bhk4,
    #[serde(rename = "5PLUS")]
    Bhk5Plus,
}

impl ApartmentType {
    pub const ALL: [ApartmentType; 6] = [
        ApartmentType::Rk1,
        ApartmentType::Bhk1,
        ApartmentType::Bhk2,
        ApartmentType::Bhk3,
        ApartmentType::Bhk4,
        ApartmentType::Bhk5Plus,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ApartmentType::Rk1 => "1RK",
            ApartmentType::Bhk1 => "1BHK",
            ApartmentType::Bhk2 => "2BHK",
            ApartmentType::Bhk3 => "3BHK",
            ApartmentType::Bhk4 => "4BHK",
            ApartmentType::Bhk5Plus => "5PLUS",
        }
    }
}

impl FromStr for ApartmentType {
    type Err = DomainError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ApartmentType::ALL
            .into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| DomainError::UnknownValue { field: "apartment_type", value: s.to_string() })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Furnishing {
    Fully,
    Semi,
    Unfurnished,
}

impl Furnishing {
    pub const ALL: [Furnishing; 3] = [Furnishing::Fully, Furnishing::Semi, Furnishing::Unfurnished];

    pub fn label(self) -> &'static str {
        match self {
            Furnishing::Fully => "Fully",
            Furnishing::Semi => "Semi",
            Furnishing::Unfurnished => "Unfurnished",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProfileType {
    Broker,
    Owner,
}

/// A listing on the platform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Property {
    pub id: PropertyId,
    pub city: String,
    pub locality: String,
    pub apartment_type: ApartmentType,
    pub furnishing: Furnishing,
    pub profile_type: ProfileType,
    /// Rupees.
    pub price: u64,
    /// Square feet.
    pub built_up_area: f64,
    pub age_years: f64,
    pub floor_number: u32,
    pub image_count: u32,
    pub listing_type: ListingType,
    pub created_at: Timestamp,
    pub active: bool,
}

impl Property {
    pub fn validate(&self) -> Result<(), DomainError> {
        let bad = |field: &'static str| Err(DomainError::InvalidProperty { id: self.id.clone(), field });
        if self.price == 0 {
            return bad("price");
        }
        if !(self.built_up_area.is_finite() && self.built_up_area > 0.0) {
            return bad("built_up_area");
        }
        if !(self.age_years.is_finite() && self.age_years >= 0.0) {
            return bad("age_years");
        }
        if self.locality.is_empty() {
            return bad("locality");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionCategory {
    Conversion,
    DetailPage,
    Impressions,
    Other,
}

/// The six canonical interaction kinds, one per row of the weight table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    SubmittedCrf,
    OtpVerified,
    OpenedOrFilledCrf,
    DetailPageEngagement,
    ImpressionDetail,
    PageScrollOrRating,
}

impl Action {
    pub const ALL: [Action; 6] = [
        Action::SubmittedCrf,
        Action::OtpVerified,
        Action::OpenedOrFilledCrf,
        Action::DetailPageEngagement,
        Action::ImpressionDetail,
        Action::PageScrollOrRating,
    ];

    pub const fn weight(self) -> u32 {
        match self {
            Action::SubmittedCrf => 10,
            Action::OtpVerified => 8,
            Action::OpenedOrFilledCrf => 6,
            Action::DetailPageEngagement => 4,
            Action::ImpressionDetail => 2,
            Action::PageScrollOrRating => 1,
        }
    }

    pub const fn category(self) -> ActionCategory {
        match self {
            Action::SubmittedCrf | Action::OtpVerified | Action::OpenedOrFilledCrf => {
                ActionCategory::Conversion
            }
            Action::DetailPageEngagement => ActionCategory::DetailPage,
            Action::ImpressionDetail => ActionCategory::Impressions,
            Action::PageScrollOrRating => ActionCategory::Other,
        }
    }

    /// Observed percentage of users going from this action to a submitted CRF,
    /// as `(purchase, rent)`. Documentation only; the synthetic funnel uses
    /// these as loose calibration targets.
    pub const fn conversion_rate_pct(self) -> (f64, f64) {
        match self {
            Action::SubmittedCrf => (100.0, 100.0),
            Action::OtpVerified => (83.5, 83.1),
            Action::OpenedOrFilledCrf => (36.8, 36.9),
            Action::DetailPageEngagement => (26.1, 27.7),
            Action::ImpressionDetail => (16.8, 14.7),
            Action::PageScrollOrRating => (23.8, 19.6),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::SubmittedCrf => "submitted_crf",
            Action::OtpVerified => "otp_verified",
            Action::OpenedOrFilledCrf => "opened_or_filled_crf",
            Action::DetailPageEngagement => "detail_page_engagement",
            Action::ImpressionDetail => "impression_detail",
            Action::PageScrollOrRating => "page_scroll_or_rating",
        }
    }

    pub fn from_canonical(name: &str) -> Option<Action> {
        Action::ALL.into_iter().find(|a| a.as_str() == name)
    }
}

/// Table weight for an action.
pub const fn action_weight(action: Action) -> u32 {
    action.weight()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionEvent {
    #[serde(rename = "ts")]
    pub timestamp: Timestamp,
    pub user_id: UserId,
    pub property_id: PropertyId,
    pub action: Action,
    pub listing_type: ListingType,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum EventRejection {
    #[error("UnknownProperty: {0}")]
    UnknownProperty(PropertyId),
    #[error("MalformedTimestamp: {0}")]
    MalformedTimestamp(String),
    #[error("ListingTypeMismatch: property {0} is not listed for {1}")]
    ListingTypeMismatch(PropertyId, ListingType),
    #[error("UnknownAction: {0}")]
    UnknownAction(String),
    #[error("MalformedEvent: {0}")]
    MalformedEvent(String),
    #[error("OutOfOrder: event at {ts} precedes last event {last} for user {user}")]
    OutOfOrder { user: UserId, ts: Timestamp, last: Timestamp },
}

impl EventRejection {
    /// Stable machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            EventRejection::UnknownProperty(_) => "UnknownProperty",
            EventRejection::MalformedTimestamp(_) => "MalformedTimestamp",
            EventRejection::ListingTypeMismatch(..) => "ListingTypeMismatch",
            EventRejection::UnknownAction(_) => "UnknownAction",
            EventRejection::MalformedEvent(_) => "MalformedEvent",
            EventRejection::OutOfOrder { .. } => "OutOfOrder",
        }
    }
}

/// Accepts an event whose property is known and whose timestamp is a valid
/// epoch-millisecond value.
pub fn validate_event<'a>(
    event: &'a InteractionEvent,
    catalog: &Catalog,
) -> Result<&'a InteractionEvent, EventRejection> {
    if event.timestamp < 0 {
        return Err(EventRejection::MalformedTimestamp(event.timestamp.to_string()));
    }
    let property = catalog
        .get(&event.property_id)
        .ok_or_else(|| EventRejection::UnknownProperty(event.property_id.clone()))?;
    if property.listing_type != event.listing_type {
        return Err(EventRejection::ListingTypeMismatch(event.property_id.clone(), event.listing_type));
    }
    Ok(event)
}

/// Inclusive numeric range.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueRange<T> {
    pub min: T,
    pub max: T,
}

impl<T: PartialOrd + Copy> ValueRange<T> {
    pub fn new(min: T, max: T) -> Self {
        ValueRange { min, max }
    }
    pub fn contains(&self, v: T) -> bool {
        self.min <= v && v <= self.max
    }
    pub fn is_ordered(&self) -> bool {
        self.min <= self.max
    }
}

pub const DEFAULT_TOP_K: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchFilter {
    pub city: String,
    pub locality: String,
    pub listing_type: ListingType,
    #[serde(default)]
    pub apartment_type: Option<ApartmentType>,
    #[serde(default)]
    pub price: Option<ValueRange<u64>>,
    #[serde(default)]
    pub area: Option<ValueRange<f64>>,
    #[serde(default = "default_top_k")]
    pub top_k: usize,
}

fn default_top_k() -> usize {
    DEFAULT_TOP_K
}

impl SearchFilter {
    pub fn new(city: impl Into<String>, locality: impl Into<String>, listing_type: ListingType) -> Self {
        SearchFilter {
            city: city.into(),
            locality: locality.into(),
            listing_type,
            apartment_type: None,
            price: None,
            area: None,
            top_k: DEFAULT_TOP_K,
        }
    }

    pub fn with_top_k(mut self, k: usize) -> Self {
        self.top_k = k;
        self
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.locality.trim().is_empty() {
            return Err(DomainError::InvalidFilter("locality"));
        }
        if self.top_k == 0 {
            return Err(DomainError::InvalidFilter("top_k"));
        }
        if self.price.is_some_and(|r| !r.is_ordered()) {
            return Err(DomainError::InvalidFilter("price"));
        }
        if self.area.is_some_and(|r| !r.is_ordered()) {
            return Err(DomainError::InvalidFilter("area"));
        }
        Ok(())
    }

    /// Predicates on the raw property fields other than locality/city.
    pub fn admits_attributes(&self, apartment_type: ApartmentType, price: u64, area: f64) -> bool {
        self.apartment_type.is_none_or(|a| a == apartment_type)
            && self.price.is_none_or(|r| r.contains(price))
            && self.area.is_none_or(|r| r.contains(area))
    }

    pub fn admits(&self, p: &Property) -> bool {
        p.active
            && p.listing_type == self.listing_type
            && p.locality == self.locality
            && (self.city.is_empty() || p.city == self.city)
            && self.admits_attributes(p.apartment_type, p.price, p.built_up_area)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UserCategory {
    ColdStart,
    ShortTerm,
    LongTerm,
    ShortLongTerm,
}

impl UserCategory {
    pub const ALL: [UserCategory; 4] = [
        UserCategory::ColdStart,
        UserCategory::ShortTerm,
        UserCategory::LongTerm,
        UserCategory::ShortLongTerm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            UserCategory::ColdStart => "cold_start",
            UserCategory::ShortTerm => "short_term",
            UserCategory::LongTerm => "long_term",
            UserCategory::ShortLongTerm => "short_long_term",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DomainError {
    #[error("invalid property {id}: field {field}")]
    InvalidProperty { id: PropertyId, field: &'static str },
    #[error("duplicate property id {0}")]
    DuplicateProperty(PropertyId),
    #[error("invalid search filter: {0}")]
    InvalidFilter(&'static str),
    #[error("unknown {field} value {value:?}")]
    UnknownValue { field: &'static str, value: String },
}

/// Immutable property catalog indexed by id and by (listing type, locality).
#[derive(Debug, Default)]
pub struct Catalog {
    properties: Vec<Property>,
    by_id: HashMap<PropertyId, usize>,
    by_locality: HashMap<(ListingType, String), Vec<usize>>,
}

impl Catalog {
    pub fn new(properties: Vec<Property>) -> Result<Self, DomainError> {
        let mut by_id = HashMap::with_capacity(properties.len());
        let mut by_locality: HashMap<(ListingType, String), Vec<usize>> = HashMap::new();
        for (i, p) in properties.iter().enumerate() {
            p.validate()?;
            if by_id.insert(p.id.clone(), i).is_some() {
                return Err(DomainError::DuplicateProperty(p.id.clone()));
            }
            by_locality.entry((p.listing_type, p.locality.clone())).or_default().push(i);
        }
        for ids in by_locality.values_mut() {
            ids.sort_by(|&a, &b| properties[a].id.cmp(&properties[b].id));
        }
        Ok(Catalog { properties, by_id, by_locality })
    }

    pub fn get(&self, id: &PropertyId) -> Option<&Property> {
        self.by_id.get(id).map(|&i| &self.properties[i])
    }

    pub fn get_str(&self, id: &str) -> Option<&Property> {
        self.by_id.get(id).map(|&i| &self.properties[i])
    }

    pub fn len(&self) -> usize {
        self.properties.len()
    }

    pub fn is_empty(&self) -> bool {
        self.properties.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Property> {
        self.properties.iter()
    }

    /// Active properties of one listing type, in catalog order.
    pub fn active(&self, listing_type: ListingType) -> impl Iterator<Item = &Property> {
        self.properties.iter().filter(move |p| p.active && p.listing_type == listing_type)
    }

    /// All properties (active or not) in a locality, ordered by id.
    pub fn in_locality<'a>(
        &'a self,
        listing_type: ListingType,
        locality: &str,
    ) -> impl Iterator<Item = &'a Property> + 'a {
        self.by_locality
            .get(&(listing_type, locality.to_string()))
            .into_iter()
            .flatten()
            .map(move |&i| &self.properties[i])
    }

    pub fn matching<'a>(&'a self, filter: &'a SearchFilter) -> impl Iterator<Item = &'a Property> + 'a {
        self.in_locality(filter.listing_type, &filter.locality).filter(move |p| filter.admits(p))
    }

    /// Localities of a city for a listing type, sorted.
    pub fn localities(&self, listing_type: ListingType, city: &str) -> Vec<String> {
        let mut out: Vec<String> = self
            .by_locality
            .iter()
            .filter(|((lt, _), ids)| {
                *lt == listing_type && ids.first().is_some_and(|&i| self.properties[i].city == city)
            })
            .map(|((_, loc), _)| loc.clone())
            .collect();
        out.sort();
        out
    }

    pub fn into_properties(self) -> Vec<Property> {
        self.properties
    }

    pub fn properties(&self) -> &[Property] {
        &self.properties
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample_property(id: &str) -> Property {
        Property {
            id: PropertyId::new(id),
            city: "Pune".into(),
            locality: "Baner".into(),
            apartment_type: ApartmentType::Bhk2,
            furnishing: Furnishing::Semi,
            profile_type: ProfileType::Owner,
            price: 7_500_000,
            built_up_area: 1200.0,
            age_years: 4.0,
            floor_number: 5,
            image_count: 7,
            listing_type: ListingType::Buy,
            created_at: 0,
            active: true,
        }
    }

    fn event(property: &str, ts: Timestamp) -> InteractionEvent {
        InteractionEvent {
            timestamp: ts,
            user_id: UserId::new("u1"),
            property_id: PropertyId::new(property),
            action: Action::DetailPageEngagement,
            listing_type: ListingType::Buy,
        }
    }

    #[test]
    fn weights_follow_the_table() {
        assert_eq!(action_weight(Action::SubmittedCrf), 10);
        assert_eq!(action_weight(Action::OtpVerified), 8);
        assert_eq!(action_weight(Action::PageScrollOrRating), 1);
        let all: Vec<u32> = Action::ALL.iter().map(|a| a.weight()).collect();
        assert_eq!(all, vec![10, 8, 6, 4, 2, 1]);
    }

    #[test]
    fn category_weights_are_ordered() {
        let min_of = |c: ActionCategory| {
            Action::ALL.iter().filter(|a| a.category() == c).map(|a| a.weight()).min().unwrap()
        };
        let max_of = |c: ActionCategory| {
            Action::ALL.iter().filter(|a| a.category() == c).map(|a| a.weight()).max().unwrap()
        };
        assert!(min_of(ActionCategory::Conversion) >= max_of(ActionCategory::DetailPage));
        assert!(min_of(ActionCategory::DetailPage) >= max_of(ActionCategory::Impressions));
        assert!(min_of(ActionCategory::Impressions) >= max_of(ActionCategory::Other));
    }

    #[test]
    fn validate_event_cases() {
        let catalog = Catalog::new(vec![sample_property("p1")]).unwrap();
        let ok = event("p1", 1_000);
        assert_eq!(validate_event(&ok, &catalog), Ok(&ok));
        assert_eq!(
            validate_event(&event("ghost", 1_000), &catalog),
            Err(EventRejection::UnknownProperty(PropertyId::new("ghost")))
        );
        assert!(matches!(
            validate_event(&event("p1", -5), &catalog),
            Err(EventRejection::MalformedTimestamp(_))
        ));
        let mut rent = ok.clone();
        rent.listing_type = ListingType::Rent;
        assert_eq!(validate_event(&rent, &catalog).unwrap_err().code(), "ListingTypeMismatch");
    }

    #[test]
    fn span_parse_and_display() {
        assert_eq!("10m".parse::<Span>().unwrap(), Span::minutes(10));
        assert_eq!("28d".parse::<Span>().unwrap(), Span::days(28));
        assert_eq!("300s".parse::<Span>().unwrap(), Span::minutes(5));
        assert_eq!(Span::days(95).to_string(), "95d");
        assert_eq!(Span::minutes(90).to_string(), "90m");
        assert_eq!(Span::from_millis(1500).to_string(), "1500ms");
        assert!("ten minutes".parse::<Span>().is_err());
        assert!("10y".parse::<Span>().is_err());
    }

    #[test]
    fn filter_validation() {
        let mut f = SearchFilter::new("Pune", "Baner", ListingType::Buy);
        assert!(f.validate().is_ok());
        f.price = Some(ValueRange::new(10, 5));
        assert_eq!(f.validate(), Err(DomainError::InvalidFilter("price")));
        let f = SearchFilter::new("Pune", "", ListingType::Buy);
        assert_eq!(f.validate(), Err(DomainError::InvalidFilter("locality")));
        let f = SearchFilter::new("Pune", "Baner", ListingType::Buy).with_top_k(0);
        assert_eq!(f.validate(), Err(DomainError::InvalidFilter("top_k")));
    }

    #[test]
    fn catalog_rejects_duplicates_and_bad_properties() {
        assert!(matches!(
            Catalog::new(vec![sample_property("a"), sample_property("a")]),
            Err(DomainError::DuplicateProperty(_))
        ));
        let mut bad = sample_property("b");
        bad.price = 0;
        assert!(matches!(Catalog::new(vec![bad]), Err(DomainError::InvalidProperty { field: "price", .. })));
    }

    #[test]
    fn event_json_field_order() {
        let json = serde_json::to_string(&event("p1", 42)).unwrap();
        assert_eq!(
            json,
            r#"{"ts":42,"user_id":"u1","property_id":"p1","action":"detail_page_engagement","listing_type":"buy"}"#
        );
    }
}
