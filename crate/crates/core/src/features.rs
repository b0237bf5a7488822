//! Binned feature space shared by property vectors and user profiles.
//!
//! Every property becomes a binary vector with one active coordinate per
//! feature kind (apartment type, furnishing, price, area, age, floor, image
//! count). A user profile lives in the same space and holds the action-weighted
//! sum of the vectors of the properties the user interacted with.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{ApartmentType, Furnishing, InteractionEvent, ListingType, Property, PropertyId};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("negative or non-finite value {0} cannot be binned")]
    NegativeValue(f64),
    #[error("property {property} is listed for {property_type}, feature space is for {space_type}")]
    ListingTypeMismatch { property: PropertyId, property_type: ListingType, space_type: ListingType },
    #[error("category {0} is not in the feature space vocabulary")]
    UnknownCategory(String),
    #[error("vectors belong to different feature spaces")]
    SpaceMismatch,
    #[error("feature space file is inconsistent: {0}")]
    CorruptSpace(String),
}

/// Bin widths for the numeric features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BinConfig {
    /// Rupees, purchase listings.
    pub price_gap_buy: u64,
    /// Rupees, rental listings.
    pub price_gap_rent: u64,
    /// Square feet.
    pub area_gap: f64,
    pub age_gap: f64,
    pub floor_gap: u32,
    pub image_gap: u32,
    /// Numeric values beyond the last bin clamp into it.
    pub max_bins: usize,
}

impl Default for BinConfig {
    fn default() -> Self {
        BinConfig {
            price_gap_buy: 500_000,
            price_gap_rent: 10_000,
            area_gap: 500.0,
            age_gap: 3.0,
            floor_gap: 2,
            image_gap: 3,
            max_bins: 200,
        }
    }
}

impl BinConfig {
    pub fn price_gap(&self, listing_type: ListingType) -> u64 {
        match listing_type {
            ListingType::Buy => self.price_gap_buy,
            ListingType::Rent => self.price_gap_rent,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.price_gap_buy == 0 || self.price_gap_rent == 0 || self.floor_gap == 0 || self.image_gap == 0 {
            return Err("bin gaps must be positive".into());
        }
        if !(self.area_gap > 0.0 && self.age_gap > 0.0) {
            return Err("bin gaps must be positive".into());
        }
        if self.max_bins == 0 {
            return Err("max_bins must be at least 1".into());
        }
        Ok(())
    }

    pub fn price_bin(&self, listing_type: ListingType, price: u64) -> usize {
        bin_index(price as f64, self.price_gap(listing_type) as f64, self.max_bins).expect("price is non-negative")
    }

    pub fn area_bin(&self, area: f64) -> Result<usize, FeatureError> {
        bin_index(area, self.area_gap, self.max_bins)
    }
}

/// Left-closed, right-open bin of `value` for bins of width `gap`, clamped to
/// `cap - 1`.
pub fn bin_index(value: f64, gap: f64, cap: usize) -> Result<usize, FeatureError> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(FeatureError::NegativeValue(value));
    }
    assert!(gap > 0.0 && cap > 0, "gap and cap must be positive");
    let mut q = (value / gap).floor();
    // Division can round across an integer boundary; settle on the bin whose
    // left edge is exactly <= value.
    if q * gap > value {
        q -= 1.0;
    } else if (q + 1.0) * gap <= value {
        q += 1.0;
    }
    let cap_f = (cap - 1) as f64;
    Ok(if q >= cap_f { cap - 1 } else { q as usize })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    ApartmentType,
    Furnishing,
    Price,
    Area,
    Age,
    Floor,
    Images,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 7] = [
        FeatureKind::ApartmentType,
        FeatureKind::Furnishing,
        FeatureKind::Price,
        FeatureKind::Area,
        FeatureKind::Age,
        FeatureKind::Floor,
        FeatureKind::Images,
    ];
}

/// Identity of a feature space, derived from its configuration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpaceId(pub u64);

/// Deterministic index over all (feature kind, bin or category) pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    listing_type: ListingType,
    bins: BinConfig,
    apartment_types: Vec<ApartmentType>,
    furnishings: Vec<Furnishing>,
    id: SpaceId,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub id: u32,
    pub kind: FeatureKind,
    pub label: String,
}

/// On-disk layout of a feature space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpaceFile {
    pub format_version: u32,
    pub listing_type: ListingType,
    pub bins: BinConfig,
    pub apartment_types: Vec<ApartmentType>,
    pub furnishings: Vec<Furnishing>,
    pub space_id: u64,
    pub features: Vec<FeatureEntry>,
}

pub const FEATURE_SPACE_FORMAT: u32 = 1;

impl FeatureSpace {
    pub fn new(listing_type: ListingType, bins: BinConfig) -> Self {
        Self::with_vocabularies(listing_type, bins, ApartmentType::ALL.to_vec(), Furnishing::ALL.to_vec())
    }

    pub fn with_vocabularies(
        listing_type: ListingType,
        bins: BinConfig,
        apartment_types: Vec<ApartmentType>,
        furnishings: Vec<Furnishing>,
    ) -> Self {
        let mut hasher = Sha256::new();
        let canonical = serde_json::to_vec(&(listing_type, &bins, &apartment_types, &furnishings))
            .expect("feature space config serializes");
        hasher.update(&canonical);
        let digest = hasher.finalize();
        let id = SpaceId(u64::from_le_bytes(digest[..8].try_into().unwrap()));
        FeatureSpace { listing_type, bins, apartment_types, furnishings, id }
    }

    pub fn id(&self) -> SpaceId {
        self.id
    }
    pub fn listing_type(&self) -> ListingType {
        self.listing_type
    }
    pub fn bins(&self) -> &BinConfig {
        &self.bins
    }

    fn cardinality(&self, kind: FeatureKind) -> usize {
        match kind {
            FeatureKind::ApartmentType => self.apartment_types.len(),
            FeatureKind::Furnishing => self.furnishings.len(),
            _ => self.bins.max_bins,
        }
    }

    pub fn offset(&self, kind: FeatureKind) -> usize {
        FeatureKind::ALL.iter().take_while(|&&k| k != kind).map(|&k| self.cardinality(k)).sum()
    }

    pub fn dimension(&self) -> usize {
        FeatureKind::ALL.iter().map(|&k| self.cardinality(k)).sum()
    }

    /// Feature id of a bin or category position within a kind.
    pub fn feature_id(&self, kind: FeatureKind, position: usize) -> u32 {
        debug_assert!(position < self.cardinality(kind));
        (self.offset(kind) + position) as u32
    }

    pub fn kind_of(&self, id: u32) -> Option<(FeatureKind, usize)> {
        let mut base = 0usize;
        for kind in FeatureKind::ALL {
            let n = self.cardinality(kind);
            if (id as usize) < base + n {
                return Some((kind, id as usize - base));
            }
            base += n;
        }
        None
    }

    pub fn apartment_types(&self) -> &[ApartmentType] {
        &self.apartment_types
    }
    pub fn furnishings(&self) -> &[Furnishing] {
        &self.furnishings
    }

    /// Full id table, in id order.
    pub fn entries(&self) -> Vec<FeatureEntry> {
        let mut out = Vec::with_capacity(self.dimension());
        for kind in FeatureKind::ALL {
            for pos in 0..self.cardinality(kind) {
                let label = match kind {
                    FeatureKind::ApartmentType => self.apartment_types[pos].label().to_string(),
                    FeatureKind::Furnishing => self.furnishings[pos].label().to_string(),
                    _ => format!("bin_{pos}"),
                };
                out.push(FeatureEntry { id: self.feature_id(kind, pos), kind, label });
            }
        }
        out
    }

    pub fn to_file(&self) -> FeatureSpaceFile {
        FeatureSpaceFile {
            format_version: FEATURE_SPACE_FORMAT,
            listing_type: self.listing_type,
            bins: self.bins.clone(),
            apartment_types: self.apartment_types.clone(),
            furnishings: self.furnishings.clone(),
            space_id: self.id.0,
            features: self.entries(),
        }
    }

    /// Rebuilds a space from its file form and checks that the stored id
    /// table matches the rebuilt one.
    pub fn from_file(file: &FeatureSpaceFile) -> Result<Self, FeatureError> {
        if file.format_version != FEATURE_SPACE_FORMAT {
            return Err(FeatureError::CorruptSpace(format!("format version {}", file.format_version)));
        }
        let space = FeatureSpace::with_vocabularies(
            file.listing_type,
            file.bins.clone(),
            file.apartment_types.clone(),
            file.furnishings.clone(),
        );
        if space.id.0 != file.space_id {
            return Err(FeatureError::CorruptSpace("space id does not match configuration".into()));
        }
        if space.entries() != file.features {
            return Err(FeatureError::CorruptSpace("id table does not match configuration".into()));
        }
        Ok(space)
    }
}

/// Sorted sparse vector with strictly positive values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseFeatureVector {
    space: SpaceId,
    entries: Vec<(u32, f64)>,
}

impl SparseFeatureVector {
    pub fn empty(space: SpaceId) -> Self {
        SparseFeatureVector { space, entries: Vec::new() }
    }

    /// Builds a vector from arbitrary (id, value) pairs: duplicates are summed
    /// and non-positive results dropped.
    pub fn from_pairs(space: SpaceId, mut pairs: Vec<(u32, f64)>) -> Self {
        pairs.sort_by_key(|&(id, _)| id);
        let mut entries: Vec<(u32, f64)> = Vec::with_capacity(pairs.len());
        for (id, v) in pairs {
            match entries.last_mut() {
                Some((last, acc)) if *last == id => *acc += v,
                _ => entries.push((id, v)),
            }
        }
        entries.retain(|&(_, v)| v > 0.0);
        SparseFeatureVector { space, entries }
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }
    pub fn entries(&self) -> &[(u32, f64)] {
        &self.entries
    }
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }
    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: u32) -> f64 {
        self.entries
            .binary_search_by_key(&id, |&(i, _)| i)
            .map(|pos| self.entries[pos].1)
            .unwrap_or(0.0)
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        assert!(alpha > 0.0);
        SparseFeatureVector {
            space: self.space,
            entries: self.entries.iter().map(|&(i, v)| (i, v * alpha)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self, FeatureError> {
        if self.space != other.space {
            return Err(FeatureError::SpaceMismatch);
        }
        let mut pairs = self.entries.clone();
        pairs.extend_from_slice(&other.entries);
        Ok(Self::from_pairs(self.space, pairs))
    }

    /// Sparse dot product via a sorted merge.
    pub fn dot(&self, other: &Self) -> f64 {
        let (a, b) = (&self.entries, &other.entries);
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Cosine similarity of two non-negative vectors, 0 when either is zero.
pub fn cosine_similarity(a: &SparseFeatureVector, b: &SparseFeatureVector) -> Result<f64, FeatureError> {
    if a.space != b.space {
        return Err(FeatureError::SpaceMismatch);
    }
    Ok(cosine_with_norms(a, a.norm(), b, b.norm()))
}

/// Cosine with precomputed norms; callers guarantee both vectors share a space.
pub(crate) fn cosine_with_norms(a: &SparseFeatureVector, norm_a: f64, b: &SparseFeatureVector, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    (a.dot(b) / (norm_a * norm_b)).clamp(0.0, 1.0)
}

pub fn featurize_property(p: &Property, space: &FeatureSpace) -> Result<SparseFeatureVector, FeatureError> {
    if p.listing_type != space.listing_type {
        return Err(FeatureError::ListingTypeMismatch {
            property: p.id.clone(),
            property_type: p.listing_type,
            space_type: space.listing_type,
        });
    }
    let apt = space
        .apartment_types
        .iter()
        .position(|&a| a == p.apartment_type)
        .ok_or_else(|| FeatureError::UnknownCategory(p.apartment_type.label().into()))?;
    let furn = space
        .furnishings
        .iter()
        .position(|&f| f == p.furnishing)
        .ok_or_else(|| FeatureError::UnknownCategory(p.furnishing.label().into()))?;
    let b = &space.bins;
    let cap = b.max_bins;
    let price = bin_index(p.price as f64, b.price_gap(p.listing_type) as f64, cap)?;
    let area = bin_index(p.built_up_area, b.area_gap, cap)?;
    let age = bin_index(p.age_years, b.age_gap, cap)?;
    let floor = bin_index(p.floor_number as f64, b.floor_gap as f64, cap)?;
    let images = bin_index(p.image_count as f64, b.image_gap as f64, cap)?;
    let entries = vec![
        (space.feature_id(FeatureKind::ApartmentType, apt), 1.0),
        (space.feature_id(FeatureKind::Furnishing, furn), 1.0),
        (space.feature_id(FeatureKind::Price, price), 1.0),
        (space.feature_id(FeatureKind::Area, area), 1.0),
        (space.feature_id(FeatureKind::Age, age), 1.0),
        (space.feature_id(FeatureKind::Floor, floor), 1.0),
        (space.feature_id(FeatureKind::Images, images), 1.0),
    ];
    // Kinds occupy increasing id ranges, so this is already sorted.
    Ok(SparseFeatureVector { space: space.id, entries })
}

/// Lookup of property vectors by id.
pub trait PropertyVectors {
    fn vector(&self, id: &PropertyId) -> Option<&SparseFeatureVector>;
}

impl PropertyVectors for HashMap<PropertyId, SparseFeatureVector> {
    fn vector(&self, id: &PropertyId) -> Option<&SparseFeatureVector> {
        self.get(id)
    }
}

impl PropertyVectors for BTreeMap<PropertyId, SparseFeatureVector> {
    fn vector(&self, id: &PropertyId) -> Option<&SparseFeatureVector> {
        self.get(id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileBuild {
    pub profile: SparseFeatureVector,
    /// Events whose property had no vector.
    pub skipped: usize,
}

/// Action-weighted sum of the vectors of the properties in `events`.
pub fn build_user_profile<'a, I, V>(events: I, vectors: &V, space: &FeatureSpace) -> ProfileBuild
where
    I: IntoIterator<Item = &'a InteractionEvent>,
    V: PropertyVectors + ?Sized,
{
    let mut dense = vec![0.0f64; space.dimension()];
    let mut touched: Vec<u32> = Vec::new();
    let mut skipped = 0;
    for e in events {
        let Some(v) = vectors.vector(&e.property_id).filter(|v| v.space == space.id) else {
            skipped += 1;
            continue;
        };
        let w = e.action.weight() as f64;
        for &(id, x) in &v.entries {
            let slot = &mut dense[id as usize];
            if *slot == 0.0 {
                touched.push(id);
            }
            *slot += w * x;
        }
    }
    touched.sort_unstable();
    let entries = touched.into_iter().map(|id| (id, dense[id as usize])).filter(|&(_, v)| v > 0.0).collect();
    ProfileBuild { profile: SparseFeatureVector { space: space.id, entries }, skipped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Action, ProfileType, UserId};
    use proptest::prelude::*;

    fn buy_property(id: &str) -> Property {
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

    fn ev(p: &str, action: Action) -> InteractionEvent {
        InteractionEvent {
            timestamp: 0,
            user_id: UserId::new("u"),
            property_id: PropertyId::new(p),
            action,
            listing_type: ListingType::Buy,
        }
    }

    #[test]
    fn bin_index_examples() {
        assert_eq!(bin_index(7_500_000.0, 500_000.0, 200), Ok(15));
        assert_eq!(bin_index(0.0, 500.0, 200), Ok(0));
        assert_eq!(bin_index(25_000.0, 10_000.0, 200), Ok(2));
        assert_eq!(bin_index(1e12, 500.0, 200), Ok(199));
        assert_eq!(bin_index(-1.0, 500.0, 200), Err(FeatureError::NegativeValue(-1.0)));
        assert!(bin_index(f64::NAN, 1.0, 10).is_err());
    }

    #[test]
    fn featurize_worked_example() {
        // price 7.5M/0.5M = 15, area 1200/500 = 2, age 4/3 = 1, floor 5/2 = 2, images 7/3 = 2
        let space = FeatureSpace::new(ListingType::Buy, BinConfig::default());
        let v = featurize_property(&buy_property("p"), &space).unwrap();
        let expected: Vec<u32> = vec![
            space.feature_id(FeatureKind::ApartmentType, 2),
            space.feature_id(FeatureKind::Furnishing, 1),
            space.feature_id(FeatureKind::Price, 15),
            space.feature_id(FeatureKind::Area, 2),
            space.feature_id(FeatureKind::Age, 1),
            space.feature_id(FeatureKind::Floor, 2),
            space.feature_id(FeatureKind::Images, 2),
        ];
        assert_eq!(v.entries().iter().map(|e| e.0).collect::<Vec<_>>(), expected);
        assert!(v.entries().iter().all(|e| e.1 == 1.0));
        assert_eq!(space.kind_of(expected[2]), Some((FeatureKind::Price, 15)));
        assert_eq!(v, featurize_property(&buy_property("other"), &space).unwrap());
    }

    #[test]
    fn rent_uses_rent_price_gap() {
        let space = FeatureSpace::new(ListingType::Rent, BinConfig::default());
        let mut p = buy_property("r");
        p.listing_type = ListingType::Rent;
        p.price = 25_000;
        let v = featurize_property(&p, &space).unwrap();
        assert!(v.get(space.feature_id(FeatureKind::Price, 2)) == 1.0);
    }

    #[test]
    fn featurize_errors() {
        let rent = FeatureSpace::new(ListingType::Rent, BinConfig::default());
        assert!(matches!(
            featurize_property(&buy_property("p"), &rent),
            Err(FeatureError::ListingTypeMismatch { .. })
        ));
        let narrow = FeatureSpace::with_vocabularies(
            ListingType::Buy,
            BinConfig::default(),
            vec![ApartmentType::Bhk1],
            Furnishing::ALL.to_vec(),
        );
        assert_eq!(
            featurize_property(&buy_property("p"), &narrow),
            Err(FeatureError::UnknownCategory("2BHK".into()))
        );
    }

    #[test]
    fn dimension_is_sum_of_cardinalities() {
        let space = FeatureSpace::new(ListingType::Buy, BinConfig::default());
        assert_eq!(space.dimension(), 6 + 3 + 5 * 200);
        let ids: Vec<u32> = space.entries().iter().map(|e| e.id).collect();
        assert_eq!(ids, (0..space.dimension() as u32).collect::<Vec<_>>());
    }

    #[test]
    fn space_file_round_trip_keeps_ids() {
        let space = FeatureSpace::new(ListingType::Rent, BinConfig::default());
        let json = serde_json::to_string(&space.to_file()).unwrap();
        let file: FeatureSpaceFile = serde_json::from_str(&json).unwrap();
        let rebuilt = FeatureSpace::from_file(&file).unwrap();
        assert_eq!(rebuilt, space);
        let again = FeatureSpace::new(ListingType::Rent, BinConfig::default());
        assert_eq!(again.id(), space.id());
        let mut tampered = file.clone();
        tampered.features[3].id = 99;
        assert!(FeatureSpace::from_file(&tampered).is_err());
    }

    #[test]
    fn profile_examples() {
        let space = FeatureSpace::new(ListingType::Buy, BinConfig::default());
        let p1 = buy_property("p1");
        let mut p2 = buy_property("p2");
        p2.furnishing = Furnishing::Fully;
        p2.price = 20_000_000;
        p2.built_up_area = 3000.0;
        p2.age_years = 20.0;
        p2.floor_number = 15;
        p2.image_count = 20;
        let mut vectors = HashMap::new();
        vectors.insert(p1.id.clone(), featurize_property(&p1, &space).unwrap());
        vectors.insert(p2.id.clone(), featurize_property(&p2, &space).unwrap());

        let single = build_user_profile(&[ev("p1", Action::SubmittedCrf)], &vectors, &space);
        assert_eq!(single.profile, vectors[&p1.id].scaled(10.0));

        let empty = build_user_profile(&[], &vectors, &space);
        assert!(empty.profile.is_zero());

        let events = [ev("p1", Action::SubmittedCrf), ev("p2", Action::PageScrollOrRating)];
        let both = build_user_profile(&events, &vectors, &space);
        let bhk2 = space.feature_id(FeatureKind::ApartmentType, 2);
        assert_eq!(both.profile.get(bhk2), 11.0);
        assert_eq!(both.profile.get(space.feature_id(FeatureKind::Furnishing, 1)), 10.0);
        assert_eq!(both.profile.get(space.feature_id(FeatureKind::Furnishing, 0)), 1.0);
        assert_eq!(both.profile.nnz(), 13);

        let missing = build_user_profile(&[ev("nope", Action::SubmittedCrf)], &vectors, &space);
        assert_eq!(missing.skipped, 1);
        assert!(missing.profile.is_zero());
    }

    #[test]
    fn cosine_examples() {
        let s = SpaceId(1);
        let a = SparseFeatureVector::from_pairs(s, vec![(0, 1.0), (1, 2.0)]);
        let b = SparseFeatureVector::from_pairs(s, vec![(0, 2.0), (1, 1.0)]);
        assert!((cosine_similarity(&a, &b).unwrap() - 0.8).abs() < 1e-12);
        assert!((cosine_similarity(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let c = SparseFeatureVector::from_pairs(s, vec![(5, 3.0)]);
        assert_eq!(cosine_similarity(&a, &c).unwrap(), 0.0);
        assert_eq!(cosine_similarity(&a, &SparseFeatureVector::empty(s)).unwrap(), 0.0);
        let other = SparseFeatureVector::from_pairs(SpaceId(2), vec![(0, 1.0)]);
        assert_eq!(cosine_similarity(&a, &other), Err(FeatureError::SpaceMismatch));
    }

    fn arb_vector(space: SpaceId) -> impl Strategy<Value = SparseFeatureVector> {
        prop::collection::vec((0u32..40, 0.01f64..50.0), 0..20)
            .prop_map(move |pairs| SparseFeatureVector::from_pairs(space, pairs))
    }

    fn arb_events() -> impl Strategy<Value = Vec<InteractionEvent>> {
        prop::collection::vec((0usize..5, 0usize..6), 0..30).prop_map(|v| {
            v.into_iter().map(|(p, a)| ev(&format!("p{p}"), Action::ALL[a])).collect()
        })
    }

    fn catalog_vectors(space: &FeatureSpace) -> HashMap<PropertyId, SparseFeatureVector> {
        (0..5)
            .map(|i| {
                let mut p = buy_property(&format!("p{i}"));
                p.price = 1_000_000 * (i as u64 + 1);
                p.floor_number = i as u32 * 3;
                p.apartment_type = ApartmentType::ALL[i % 6];
                (p.id.clone(), featurize_property(&p, space).unwrap())
            })
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn cosine_symmetric_bounded_scale_invariant(
            a in arb_vector(SpaceId(7)),
            b in arb_vector(SpaceId(7)),
            alpha in 0.001f64..1000.0,
        ) {
            let ab = cosine_similarity(&a, &b).unwrap();
            let ba = cosine_similarity(&b, &a).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-9);
            prop_assert!((0.0..=1.0).contains(&ab));
            if !a.is_zero() {
                let scaled = cosine_similarity(&a.scaled(alpha), &b).unwrap();
                prop_assert!((scaled - ab).abs() <= 1e-9);
            }
        }

        #[test]
        fn bin_index_monotone_and_periodic(v in 0u64..10_000_000, d in 0u64..1_000_000, gap in 1u64..600_000) {
            let cap = 200;
            let b0 = bin_index(v as f64, gap as f64, cap).unwrap();
            let b1 = bin_index((v + d) as f64, gap as f64, cap).unwrap();
            prop_assert!(b1 >= b0);
            if v + gap < (cap as u64 - 1) * gap {
                let next = bin_index((v + gap) as f64, gap as f64, cap).unwrap();
                prop_assert_eq!(next, b0 + 1);
            }
        }

        #[test]
        fn profile_is_additive_and_order_free(e1 in arb_events(), e2 in arb_events(), seed in any::<u64>()) {
            let space = FeatureSpace::new(ListingType::Buy, BinConfig::default());
            let vectors = catalog_vectors(&space);
            let mut all = e1.clone();
            all.extend(e2.iter().cloned());
            let whole = build_user_profile(&all, &vectors, &space).profile;
            let parts = build_user_profile(&e1, &vectors, &space)
                .profile
                .add(&build_user_profile(&e2, &vectors, &space).profile)
                .unwrap();
            prop_assert_eq!(&whole, &parts);

            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut shuffled = all.clone();
            shuffled.shuffle(&mut rng);
            prop_assert_eq!(build_user_profile(&shuffled, &vectors, &space).profile, whole);
        }
    }
}
