//! Rule-based engine for users without usable history.
//!
//! Properties are grouped into cohorts by locality, apartment type, profile
//! type, price bin and area bin. Each cohort is scored by the sum of four
//! min-max normalized popularity metrics, and a request is answered with a
//! seeded random sample of two members from each of the best matching cohorts.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{
    Action, ApartmentType, InteractionEvent, ListingType, ProfileType, Property, PropertyId, SearchFilter, Timestamp,
    UserId, DAY_MS,
};
use crate::features::BinConfig;
use crate::response::{sort_ranked, ScoredItem};

/// Members sampled from each selected cohort.
pub const SAMPLES_PER_COHORT: usize = 2;
pub const DEFAULT_COHORTS_PER_REQUEST: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CohortKey {
    pub locality: String,
    pub apartment_type: ApartmentType,
    pub profile_type: ProfileType,
    pub price_bin: u32,
    pub area_bin: u32,
    pub listing_type: ListingType,
}

impl CohortKey {
    pub fn of(p: &Property, bins: &BinConfig) -> Self {
        CohortKey {
            locality: p.locality.clone(),
            apartment_type: p.apartment_type,
            profile_type: p.profile_type,
            price_bin: bins.price_bin(p.listing_type, p.price) as u32,
            area_bin: bins.area_bin(p.built_up_area).expect("validated area") as u32,
            listing_type: p.listing_type,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortStats {
    pub key: CohortKey,
    pub city: String,
    pub member_property_ids: BTreeSet<PropertyId>,
    pub num_flats: usize,
    pub total_leads: usize,
    pub pct_property_conversions: f64,
    pub pct_user_conversions: f64,
    /// Sum of the four normalized metrics, in [0, 4].
    pub score: f64,
}

impl CohortStats {
    fn raw_metrics(&self) -> [f64; 4] {
        [
            self.num_flats as f64,
            self.total_leads as f64,
            self.pct_property_conversions,
            self.pct_user_conversions,
        ]
    }
}

pub type CohortMap = BTreeMap<CohortKey, CohortStats>;

/// Partitions active properties into cohorts and computes the raw metrics
/// from `events`. Scores are left at zero; see [`score_cohorts`].
pub fn build_cohorts<'a>(
    properties: impl IntoIterator<Item = &'a Property>,
    events: &[InteractionEvent],
    bins: &BinConfig,
) -> CohortMap {
    let mut cohorts: CohortMap = BTreeMap::new();
    let mut member_of: HashMap<&PropertyId, CohortKey> = HashMap::new();
    for p in properties.into_iter().filter(|p| p.active) {
        let key = CohortKey::of(p, bins);
        let entry = cohorts.entry(key.clone()).or_insert_with(|| CohortStats {
            key: key.clone(),
            city: p.city.clone(),
            member_property_ids: BTreeSet::new(),
            num_flats: 0,
            total_leads: 0,
            pct_property_conversions: 0.0,
            pct_user_conversions: 0.0,
            score: 0.0,
        });
        entry.member_property_ids.insert(p.id.clone());
        member_of.insert(&p.id, key);
    }

    let mut leads: HashMap<&CohortKey, usize> = HashMap::new();
    let mut leaded: HashMap<&CohortKey, HashSet<&PropertyId>> = HashMap::new();
    let mut users: HashMap<&CohortKey, HashSet<&UserId>> = HashMap::new();
    let mut converters: HashMap<&CohortKey, HashSet<&UserId>> = HashMap::new();
    for e in events {
        let Some(key) = member_of.get(&e.property_id) else { continue };
        users.entry(key).or_default().insert(&e.user_id);
        if e.action == Action::SubmittedCrf {
            *leads.entry(key).or_default() += 1;
            leaded.entry(key).or_default().insert(&e.property_id);
            converters.entry(key).or_default().insert(&e.user_id);
        }
    }

    let mut stats_updates: Vec<(CohortKey, usize, f64, f64)> = Vec::with_capacity(cohorts.len());
    for (key, stats) in &cohorts {
        let n = stats.member_property_ids.len();
        let total_leads = leads.get(key).copied().unwrap_or(0);
        let leaded_props = leaded.get(key).map_or(0, |s| s.len());
        let pct_props = if n == 0 { 0.0 } else { leaded_props as f64 / n as f64 };
        let interacting = users.get(key).map_or(0, |s| s.len());
        let converting = converters.get(key).map_or(0, |s| s.len());
        let pct_users = if interacting == 0 { 0.0 } else { converting as f64 / interacting as f64 };
        stats_updates.push((key.clone(), total_leads, pct_props, pct_users));
    }
    for (key, total_leads, pct_props, pct_users) in stats_updates {
        let s = cohorts.get_mut(&key).expect("key present");
        s.num_flats = s.member_property_ids.len();
        s.total_leads = total_leads;
        s.pct_property_conversions = pct_props;
        s.pct_user_conversions = pct_users;
    }
    cohorts
}

/// Fills `score` with the sum of the four metrics, each min-max normalized
/// across cohorts of the same (city, listing type). A metric that is constant
/// within a scope contributes 0.
pub fn score_cohorts(mut cohorts: CohortMap) -> CohortMap {
    let mut ranges: HashMap<(String, ListingType), ([f64; 4], [f64; 4])> = HashMap::new();
    for s in cohorts.values() {
        let m = s.raw_metrics();
        let r = ranges
            .entry((s.city.clone(), s.key.listing_type))
            .or_insert(([f64::INFINITY; 4], [f64::NEG_INFINITY; 4]));
        for i in 0..4 {
            r.0[i] = r.0[i].min(m[i]);
            r.1[i] = r.1[i].max(m[i]);
        }
    }
    for s in cohorts.values_mut() {
        let (lo, hi) = ranges[&(s.city.clone(), s.key.listing_type)];
        let m = s.raw_metrics();
        s.score = (0..4)
            .map(|i| if hi[i] > lo[i] { (m[i] - lo[i]) / (hi[i] - lo[i]) } else { 0.0 })
            .sum();
    }
    cohorts
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ColdStartError {
    #[error("no cohort matches the search filter")]
    NoMatchingCohorts,
}

/// Published cohort table for one listing type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortSnapshot {
    pub listing_type: ListingType,
    pub built_at: Timestamp,
    pub window: (Timestamp, Timestamp),
    pub bins: BinConfig,
    /// Sorted by key.
    pub cohorts: Vec<CohortStats>,
    #[serde(skip)]
    by_locality: HashMap<String, Vec<usize>>,
    #[serde(skip)]
    by_city: HashMap<String, Vec<usize>>,
}

/// Whether cohort selection is restricted to the filter's locality or
/// widened to the whole city.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CohortScope {
    Locality,
    City,
}

impl CohortSnapshot {
    pub fn new(
        listing_type: ListingType,
        built_at: Timestamp,
        window: (Timestamp, Timestamp),
        bins: BinConfig,
        scored: CohortMap,
    ) -> Self {
        let cohorts =
            scored.into_values().filter(|c| c.key.listing_type == listing_type).collect();
        CohortSnapshot {
            listing_type,
            built_at,
            window,
            bins,
            cohorts,
            by_locality: HashMap::new(),
            by_city: HashMap::new(),
        }
        .reindexed()
    }

    /// Rebuilds the lookup indexes; required after deserialization.
    pub fn reindexed(mut self) -> Self {
        self.by_locality.clear();
        self.by_city.clear();
        for (i, c) in self.cohorts.iter().enumerate() {
            self.by_locality.entry(c.key.locality.clone()).or_default().push(i);
            self.by_city.entry(c.city.clone()).or_default().push(i);
        }
        self
    }

    pub fn is_empty(&self) -> bool {
        self.cohorts.is_empty()
    }

    pub fn has_city(&self, city: &str) -> bool {
        self.by_city.contains_key(city)
    }

    pub fn total_members(&self) -> usize {
        self.cohorts.iter().map(|c| c.num_flats).sum()
    }

    fn bin_overlaps(bin: u32, gap: f64, cap: usize, lo: f64, hi: f64) -> bool {
        let start = bin as f64 * gap;
        let end = if bin as usize + 1 >= cap { f64::INFINITY } else { start + gap };
        start <= hi && end > lo
    }

    fn compatible(&self, c: &CohortStats, filter: &SearchFilter, scope: CohortScope) -> bool {
        let k = &c.key;
        if k.listing_type != filter.listing_type {
            return false;
        }
        if scope == CohortScope::Locality && k.locality != filter.locality {
            return false;
        }
        if !filter.city.is_empty() && c.city != filter.city {
            return false;
        }
        if filter.apartment_type.is_some_and(|a| a != k.apartment_type) {
            return false;
        }
        let cap = self.bins.max_bins;
        if let Some(r) = filter.price {
            let gap = self.bins.price_gap(k.listing_type) as f64;
            if !Self::bin_overlaps(k.price_bin, gap, cap, r.min as f64, r.max as f64) {
                return false;
            }
        }
        if let Some(r) = filter.area {
            if !Self::bin_overlaps(k.area_bin, self.bins.area_gap, cap, r.min, r.max) {
                return false;
            }
        }
        true
    }

    /// Best `n_cohorts` compatible cohorts, by descending score then key.
    pub fn matching_cohorts(&self, filter: &SearchFilter, scope: CohortScope, n_cohorts: usize) -> Vec<&CohortStats> {
        let pool = match scope {
            CohortScope::Locality => self.by_locality.get(&filter.locality),
            CohortScope::City => self.by_city.get(&filter.city),
        };
        let mut matching: Vec<&CohortStats> = match (scope, pool) {
            (_, Some(ix)) => ix.iter().map(|&i| &self.cohorts[i]).collect(),
            (CohortScope::City, None) if filter.city.is_empty() => self.cohorts.iter().collect(),
            _ => Vec::new(),
        };
        matching.retain(|c| !c.member_property_ids.is_empty() && self.compatible(c, filter, scope));
        matching.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.key.cmp(&b.key)));
        matching.truncate(n_cohorts);
        matching
    }
}

/// Per-request sampling seed from the engine seed, the user and the day, so a
/// user sees a stable sample within a day and a fresh one the next.
pub fn request_seed(rng_seed: u64, user_id: &str, now: Timestamp) -> u64 {
    let day = now.div_euclid(DAY_MS);
    let mut h = Sha256::new();
    h.update(rng_seed.to_le_bytes());
    h.update(user_id.as_bytes());
    h.update(day.to_le_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().unwrap())
}

/// Samples [`SAMPLES_PER_COHORT`] members from each of the best matching
/// cohorts; each item carries its cohort's score.
pub fn recommend_cold_start(
    filter: &SearchFilter,
    snapshot: &CohortSnapshot,
    seed: u64,
    n_cohorts: usize,
    scope: CohortScope,
) -> Result<Vec<ScoredItem>, ColdStartError> {
    let cohorts = snapshot.matching_cohorts(filter, scope, n_cohorts);
    if cohorts.is_empty() {
        return Err(ColdStartError::NoMatchingCohorts);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::with_capacity(cohorts.len() * SAMPLES_PER_COHORT);
    for c in cohorts {
        let members: Vec<&PropertyId> = c.member_property_ids.iter().collect();
        let mut picked: Vec<&PropertyId> =
            members.choose_multiple(&mut rng, SAMPLES_PER_COHORT).copied().collect();
        picked.sort();
        items.extend(picked.into_iter().map(|id| ScoredItem::new(id.clone(), c.score)));
    }
    sort_ranked(&mut items);
    items.truncate(filter.top_k);
    Ok(items)
}

/// Number of cohorts needed to fill a page of `top_k` items.
pub fn cohorts_for_page(top_k: usize) -> usize {
    top_k.div_ceil(SAMPLES_PER_COHORT).max(1)
}
