//! Deterministic synthetic worlds: a property catalog plus a clickstream
//! simulated from planted user preferences.
//!
//! Catalog marginals:
//!
//! | field | distribution |
//! |---|---|
//! | listing type | Buy with probability `buy_fraction` (0.6) |
//! | apartment type | 1RK .05, 1BHK .18, 2BHK .35, 3BHK .27, 4BHK .10, 5+ .05 |
//! | area | per-type base (350/550/950/1400/2000/2800 sqft) times log-normal(0, 0.15) |
//! | price per sqft | log-normal, median ₹6000 (Buy) or ₹20 (Rent), σ 0.35, clamped to [¼, 4]× median |
//! | furnishing | fully .25, semi .45, unfurnished .30 |
//! | profile | broker .6, owner .4 |
//! | age | 20·u² years, u uniform |
//! | floor | 0 to 20, skewed low |
//! | images | 0 to 20 uniform |
//!
//! Every locality receives at least 20 properties when the catalog is large
//! enough. Locality names embed the city, so they are unique catalog-wide.
//!
//! Each user has a home city, one to three localities in it, and a planted
//! preference vector in the binned feature space (non-negative, unit norm):
//! the normalized vector of an anchor listing. Drift swaps the anchor.
//! A session picks a locality, then views properties drawn with probability
//! proportional to `cos(preference, vector)^sharpness`, and each view walks a
//! funnel calibrated against the observed per-action conversion rates.

use std::collections::{BTreeMap, HashMap};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    Action, ApartmentType, Furnishing, InteractionEvent, ListingType, ProfileType, Property, PropertyId, Span,
    Timestamp, UserId, DAY_MS,
};
use crate::features::{cosine_similarity, featurize_property, BinConfig, FeatureSpace, SparseFeatureVector};

pub const CITIES: [&str; 8] = ["Mumbai", "Delhi", "Bengaluru", "Pune", "Hyderabad", "Chennai", "Kolkata", "Ahmedabad"];

pub const MIN_PER_LOCALITY: usize = 20;

/// In [`ApartmentType::ALL`] order: 1RK, 1BHK, 2BHK, 3BHK, 4BHK, 5+.
const APARTMENT_MIX: [f64; 6] = [0.05, 0.18, 0.35, 0.27, 0.10, 0.05];
const BASE_AREA: [f64; 6] = [350.0, 550.0, 950.0, 1400.0, 2000.0, 2800.0];
const FURNISHING_MIX: [f64; 3] = [0.25, 0.45, 0.30];

/// Median price per square foot, rupees.
pub fn median_price_per_sqft(listing_type: ListingType) -> f64 {
    match listing_type {
        ListingType::Buy => 6000.0,
        ListingType::Rent => 20.0,
    }
}

pub const PRICE_SIGMA: f64 = 0.35;

fn mix(seed: u64, salt: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn rng_for(seed: u64, stream: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix(mix(seed, stream), index))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogParams {
    pub count: usize,
    /// Number of cities used, at most [`CITIES`]`.len()`.
    pub cities: usize,
    /// Average locality size.
    pub mean_per_locality: usize,
    pub buy_fraction: f64,
    /// Share of listings marked inactive.
    pub inactive_fraction: f64,
    /// Listings are created in the 60 days before this instant.
    pub created_before: Timestamp,
    pub seed: u64,
}

impl Default for CatalogParams {
    fn default() -> Self {
        CatalogParams {
            count: 10_000,
            cities: CITIES.len(),
            mean_per_locality: 60,
            buy_fraction: 0.6,
            inactive_fraction: 0.0,
            created_before: 0,
            seed: 42,
        }
    }
}

/// Locality names for a catalog of `count` properties, with their city.
pub fn locality_plan(count: usize, cities: usize, mean_per_locality: usize) -> Vec<(String, String)> {
    let cities = cities.clamp(1, CITIES.len());
    let n = (count / mean_per_locality.max(MIN_PER_LOCALITY)).max(1);
    (0..n)
        .map(|j| {
            let city = CITIES[j % cities];
            (city.to_string(), format!("{city} Sector {}", j / cities + 1))
        })
        .collect()
}

/// Generates the catalog. Ids are `P` plus a zero-padded index.
pub fn gen_properties(params: &CatalogParams) -> Vec<Property> {
    let plan = locality_plan(params.count, params.cities, params.mean_per_locality);
    let apartment = WeightedIndex::new(APARTMENT_MIX).expect("static weights");
    let furnishing = WeightedIndex::new(FURNISHING_MIX).expect("static weights");
    let area_noise = LogNormal::new(0.0, 0.15).expect("static params");
    let width = (params.count.max(1) as f64).log10().ceil().max(1.0) as usize;
    let guaranteed = MIN_PER_LOCALITY * plan.len();
    let mut rng = rng_for(params.seed, 1, 0);
    (0..params.count)
        .map(|i| {
            let loc = if i < guaranteed { i % plan.len() } else { rng.gen_range(0..plan.len()) };
            let (city, locality) = &plan[loc];
            let listing_type = if rng.gen_bool(params.buy_fraction) { ListingType::Buy } else { ListingType::Rent };
            let apt = apartment.sample(&mut rng);
            let area = (BASE_AREA[apt] * area_noise.sample(&mut rng)).round();
            let median = median_price_per_sqft(listing_type);
            let psf = LogNormal::new(median.ln(), PRICE_SIGMA).expect("valid").sample(&mut rng).clamp(median / 4.0, median * 4.0);
            let step = if listing_type == ListingType::Buy { 1000.0 } else { 100.0 };
            let price = ((area * psf / step).round() * step).max(step) as u64;
            let u: f64 = rng.gen();
            let floor_u: f64 = rng.gen();
            Property {
                id: PropertyId::new(format!("P{i:0width$}")),
                city: city.clone(),
                locality: locality.clone(),
                apartment_type: ApartmentType::ALL[apt],
                furnishing: Furnishing::ALL[furnishing.sample(&mut rng)],
                profile_type: if rng.gen_bool(0.6) { ProfileType::Broker } else { ProfileType::Owner },
                price,
                built_up_area: area,
                age_years: (20.0 * u * u * 10.0).round() / 10.0,
                floor_number: (20.0 * floor_u * floor_u) as u32,
                image_count: rng.gen_range(0..=20),
                listing_type,
                created_at: params.created_before - rng.gen_range(0..60 * DAY_MS),
                active: !rng.gen_bool(params.inactive_fraction),
            }
        })
        .collect()
}

/// Per-view action probabilities. Each is conditional on the previous step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Funnel {
    pub scroll: f64,
    pub engage_after_scroll: f64,
    pub engage: f64,
    pub open_crf: f64,
    pub otp: f64,
    pub submit: f64,
}

impl Default for Funnel {
    /// Chosen so the chance that a view reaching each action ends in a
    /// submitted CRF lands near the observed conversion column: submit after
    /// OTP .835, after opening .37, after engagement .26, after scrolling
    /// about .24 and after an impression about .18.
    fn default() -> Self {
        Funnel { scroll: 0.5, engage_after_scroll: 0.9, engage: 0.45, open_crf: 0.71, otp: 0.44, submit: 0.835 }
    }
}

impl Funnel {
    pub fn validate(&self) -> Result<(), String> {
        let all = [self.scroll, self.engage_after_scroll, self.engage, self.open_crf, self.otp, self.submit];
        if all.iter().all(|p| (0.0..=1.0).contains(p)) {
            Ok(())
        } else {
            Err("funnel probabilities must lie in [0, 1]".into())
        }
    }

    /// Probability that a view which reached `action` ends in a submitted CRF.
    pub fn conversion_after(&self, action: Action) -> f64 {
        let after_open = self.otp * self.submit;
        let after_engage = self.open_crf * after_open;
        match action {
            Action::SubmittedCrf => 1.0,
            Action::OtpVerified => self.submit,
            Action::OpenedOrFilledCrf => after_open,
            Action::DetailPageEngagement => after_engage,
            Action::PageScrollOrRating => self.engage_after_scroll * after_engage,
            Action::ImpressionDetail => {
                (self.scroll * self.engage_after_scroll + (1.0 - self.scroll) * self.engage) * after_engage
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionParams {
    /// Mean session arrivals per user per day; each user's own rate is this
    /// times a log-normal(0, `rate_sigma`) factor.
    pub sessions_per_day: f64,
    pub rate_sigma: f64,
    /// Mean properties viewed per session (at least one).
    pub mean_views: f64,
    /// Mean gap between views within a session.
    pub view_gap: Span,
    pub sharpness: f64,
    /// Users browse between one and this many localities of their city.
    pub max_localities: usize,
    /// A new preference vector every this long, or never.
    pub drift: Option<Span>,
    pub funnel: Funnel,
}

impl Default for SessionParams {
    fn default() -> Self {
        SessionParams {
            sessions_per_day: 0.1,
            rate_sigma: 1.0,
            mean_views: 4.0,
            view_gap: Span::seconds(45),
            sharpness: 1.0,
            max_localities: 3,
            drift: None,
            funnel: Funnel::default(),
        }
    }
}

/// One simulated user.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticUser {
    pub user_id: UserId,
    pub listing_type: ListingType,
    pub city: String,
    /// Localities with visit weights summing to one.
    pub localities: Vec<(String, f64)>,
    pub sessions_per_day: f64,
    /// Preference for the first drift period (the only one without drift).
    pub preference: SparseFeatureVector,
    seed: u64,
}

/// Catalog lookups the simulator needs, built once per world.
pub struct WorldIndex<'a> {
    pub spaces: [FeatureSpace; 2],
    pub properties: &'a [Property],
    vectors: Vec<Option<SparseFeatureVector>>,
    /// Locality to active property indices per listing type.
    by_locality: BTreeMap<&'a str, [Vec<usize>; 2]>,
    /// (listing type, city) to localities with at least one active listing.
    by_city: BTreeMap<(ListingType, &'a str), Vec<&'a str>>,
}

impl<'a> WorldIndex<'a> {
    pub fn new(properties: &'a [Property], bins: &BinConfig) -> Self {
        let spaces = ListingType::ALL.map(|lt| FeatureSpace::new(lt, bins.clone()));
        let vectors: Vec<Option<SparseFeatureVector>> = properties
            .iter()
            .map(|p| featurize_property(p, &spaces[p.listing_type.index()]).ok())
            .collect();
        let mut by_locality: BTreeMap<&str, [Vec<usize>; 2]> = BTreeMap::new();
        for (i, p) in properties.iter().enumerate() {
            if p.active && vectors[i].is_some() {
                by_locality.entry(p.locality.as_str()).or_default()[p.listing_type.index()].push(i);
            }
        }
        let mut by_city: BTreeMap<(ListingType, &str), Vec<&str>> = BTreeMap::new();
        for (&loc, lists) in &by_locality {
            for lt in ListingType::ALL {
                if let Some(&first) = lists[lt.index()].first() {
                    by_city.entry((lt, properties[first].city.as_str())).or_default().push(loc);
                }
            }
        }
        WorldIndex { spaces, properties, vectors, by_locality, by_city }
    }

    pub fn vector(&self, i: usize) -> Option<&SparseFeatureVector> {
        self.vectors[i].as_ref()
    }

    pub fn in_locality(&self, lt: ListingType, locality: &str) -> &[usize] {
        self.by_locality.get(locality).map_or(&[], |lists| lists[lt.index()].as_slice())
    }

    /// True preference of `pref` for property `i`.
    pub fn affinity(&self, pref: &SparseFeatureVector, i: usize) -> f64 {
        self.vector(i).and_then(|v| cosine_similarity(pref, v).ok()).unwrap_or(0.0)
    }
}

fn normalized(v: SparseFeatureVector) -> SparseFeatureVector {
    let n = v.norm();
    if n > 0.0 {
        v.scaled(1.0 / n)
    } else {
        v
    }
}

/// The normalized vector of one listing drawn from the user's localities:
/// the user is after "something like this one".
fn draw_preference(index: &WorldIndex<'_>, user: &SyntheticUser, rng: &mut ChaCha8Rng) -> SparseFeatureVector {
    let (loc, _) = &user.localities[rng.gen_range(0..user.localities.len())];
    let list = index.in_locality(user.listing_type, loc);
    let anchor = index.vector(list[rng.gen_range(0..list.len())]).expect("indexed listings have vectors").clone();
    normalized(anchor)
}

impl SyntheticUser {
    /// Preference in force during drift period `period`.
    pub fn preference_in(&self, index: &WorldIndex<'_>, period: u64) -> SparseFeatureVector {
        if period == 0 {
            return self.preference.clone();
        }
        draw_preference(index, self, &mut rng_for(self.seed, 7, period))
    }

    /// Preference in force at `t` for a world starting at `start`.
    pub fn preference_at(&self, index: &WorldIndex<'_>, start: Timestamp, t: Timestamp, drift: Option<Span>) -> SparseFeatureVector {
        match drift {
            Some(d) if d.is_positive() => self.preference_in(index, ((t - start).max(0) / d.as_millis()) as u64),
            _ => self.preference.clone(),
        }
    }
}

/// Users named `U` plus a zero-padded index, 60% shopping to buy.
pub fn gen_users(count: usize, index: &WorldIndex<'_>, params: &SessionParams, seed: u64) -> Vec<SyntheticUser> {
    let width = (count.max(1) as f64).log10().ceil().max(1.0) as usize;
    let rate = LogNormal::new(0.0, params.rate_sigma.max(0.0)).expect("valid sigma");
    (0..count)
        .filter_map(|i| {
            let mut rng = rng_for(seed, 2, i as u64);
            let lt = if rng.gen_bool(0.6) { ListingType::Buy } else { ListingType::Rent };
            let cities: Vec<&(ListingType, &str)> = index.by_city.keys().filter(|(l, _)| *l == lt).collect();
            let &&(lt, city) = cities.get(rng.gen_range(0..cities.len().max(1)))?;
            let locs = &index.by_city[&(lt, city)];
            let n = rng.gen_range(1..=params.max_localities.clamp(1, 3).min(locs.len()));
            let mut chosen: Vec<&str> = Vec::with_capacity(n);
            while chosen.len() < n {
                let l = locs[rng.gen_range(0..locs.len())];
                if !chosen.contains(&l) {
                    chosen.push(l);
                }
            }
            let weights = [[1.0, 0.0, 0.0], [0.7, 0.3, 0.0], [0.6, 0.25, 0.15]][n - 1];
            let mut user = SyntheticUser {
                user_id: UserId::new(format!("U{i:0width$}")),
                listing_type: lt,
                city: city.to_string(),
                localities: chosen.iter().zip(weights).map(|(l, w)| (l.to_string(), w)).collect(),
                sessions_per_day: params.sessions_per_day * rate.sample(&mut rng),
                preference: SparseFeatureVector::empty(index.spaces[lt.index()].id()),
                seed: rng.gen(),
            };
            user.preference = draw_preference(index, &user, &mut rng_for(user.seed, 7, 0));
            Some(user)
        })
        .collect()
}

fn ev(t: Timestamp, user: &SyntheticUser, p: &Property, action: Action) -> InteractionEvent {
    InteractionEvent {
        timestamp: t,
        user_id: user.user_id.clone(),
        property_id: p.id.clone(),
        action,
        listing_type: user.listing_type,
    }
}

fn simulate_user(
    user: &SyntheticUser,
    index: &WorldIndex<'_>,
    start: Timestamp,
    end: Timestamp,
    params: &SessionParams,
    seed: u64,
) -> Vec<InteractionEvent> {
    let mut out = Vec::new();
    if user.sessions_per_day <= 0.0 || end <= start {
        return out;
    }
    let mut rng = rng_for(seed ^ user.seed, 3, 0);
    let arrival = Exp::new(user.sessions_per_day / DAY_MS as f64).expect("positive rate");
    let view_gap = Exp::new(1.0 / params.view_gap.as_millis().max(1) as f64).expect("positive rate");
    let loc_weights = WeightedIndex::new(user.localities.iter().map(|l| l.1)).expect("positive weights");
    let extra_views = 1.0 - 1.0 / params.mean_views.max(1.0);
    let f = &params.funnel;
    let mut cache: HashMap<(u64, usize), Option<WeightedIndex<f64>>> = HashMap::new();
    let mut prefs: HashMap<u64, SparseFeatureVector> = HashMap::new();
    let drift = params.drift.filter(|d| d.is_positive()).map(|d| d.as_millis());

    let mut t = start + arrival.sample(&mut rng) as i64;
    while t < end {
        let loc_idx = loc_weights.sample(&mut rng);
        let candidates = index.in_locality(user.listing_type, &user.localities[loc_idx].0);
        loop {
            let period = drift.map_or(0, |d| ((t - start) / d) as u64);
            let pref = prefs.entry(period).or_insert_with(|| user.preference_in(index, period));
            let weights = cache.entry((period, loc_idx)).or_insert_with(|| {
                WeightedIndex::new(candidates.iter().map(|&i| index.affinity(pref, i).powf(params.sharpness))).ok()
            });
            let Some(weights) = weights.as_ref() else { break };
            let p = &index.properties[candidates[weights.sample(&mut rng)]];
            let mut at = t;
            let mut acts = vec![(at, Action::ImpressionDetail)];
            let scrolled = rng.gen_bool(f.scroll);
            if scrolled {
                at += rng.gen_range(5_000..30_000);
                acts.push((at, Action::PageScrollOrRating));
            }
            if rng.gen_bool(if scrolled { f.engage_after_scroll } else { f.engage }) {
                at += rng.gen_range(5_000..30_000);
                acts.push((at, Action::DetailPageEngagement));
                if rng.gen_bool(f.open_crf) {
                    at += rng.gen_range(5_000..30_000);
                    acts.push((at, Action::OpenedOrFilledCrf));
                    if rng.gen_bool(f.otp) {
                        at += rng.gen_range(5_000..30_000);
                        acts.push((at, Action::OtpVerified));
                        if rng.gen_bool(f.submit) {
                            at += rng.gen_range(5_000..30_000);
                            acts.push((at, Action::SubmittedCrf));
                        }
                    }
                }
            }
            out.extend(acts.into_iter().filter(|(a, _)| *a < end).map(|(a, action)| ev(a, user, p, action)));
            t = at + 1 + view_gap.sample(&mut rng) as i64;
            if t >= end || !rng.gen_bool(extra_views) {
                break;
            }
        }
        if prefs.len() > 4 {
            prefs.clear();
            cache.clear();
        }
        t += arrival.sample(&mut rng) as i64;
    }
    out
}

/// Simulates every user over `[start, start + duration)`. The log is sorted
/// by timestamp, then user id, and each user's events are in time order.
pub fn simulate_sessions(
    users: &[SyntheticUser],
    index: &WorldIndex<'_>,
    start: Timestamp,
    duration: Span,
    params: &SessionParams,
    seed: u64,
) -> Vec<InteractionEvent> {
    let end = start + duration.as_millis();
    let mut events: Vec<InteractionEvent> =
        users.par_iter().flat_map_iter(|u| simulate_user(u, index, start, end, params, seed)).collect();
    events.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.user_id.cmp(&b.user_id)));
    events
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldParams {
    pub catalog: CatalogParams,
    pub users: usize,
    pub start: Timestamp,
    pub duration: Span,
    pub sessions: SessionParams,
    pub bins: BinConfig,
    pub seed: u64,
}

impl Default for WorldParams {
    fn default() -> Self {
        // 2026-01-05 00:00 UTC
        let start = 1_767_571_200_000;
        WorldParams {
            catalog: CatalogParams { created_before: start, ..CatalogParams::default() },
            users: 10_000,
            start,
            duration: Span::days(1),
            sessions: SessionParams::default(),
            bins: BinConfig::default(),
            seed: 42,
        }
    }
}

impl WorldParams {
    /// Catalog and user counts and the span, everything else default. The
    /// catalog seed follows `seed`.
    pub fn sized(properties: usize, users: usize, duration: Span, seed: u64) -> Self {
        let d = WorldParams::default();
        WorldParams {
            catalog: CatalogParams { count: properties, seed, ..d.catalog.clone() },
            users,
            duration,
            seed,
            ..d
        }
    }
}

pub struct World {
    pub params: WorldParams,
    pub properties: Vec<Property>,
    pub users: Vec<SyntheticUser>,
    pub events: Vec<InteractionEvent>,
}

impl World {
    pub fn generate(params: WorldParams) -> World {
        let properties = gen_properties(&params.catalog);
        let index = WorldIndex::new(&properties, &params.bins);
        let users = gen_users(params.users, &index, &params.sessions, params.seed);
        let events = simulate_sessions(&users, &index, params.start, params.duration, &params.sessions, params.seed);
        drop(index);
        World { params, properties, users, events }
    }

    pub fn index(&self) -> WorldIndex<'_> {
        WorldIndex::new(&self.properties, &self.params.bins)
    }

    pub fn end(&self) -> Timestamp {
        self.params.start + self.params.duration.as_millis()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> WorldParams {
        let mut p = WorldParams::sized(600, 100, Span::days(2), 3);
        p.sessions.sessions_per_day = 3.0;
        p
    }

    #[test]
    fn price_marginals_match_the_plan() {
        let props = gen_properties(&CatalogParams { count: 20_000, ..CatalogParams::default() });
        let max_rent = props.iter().filter(|p| p.listing_type == ListingType::Rent).map(|p| p.price).max().unwrap();
        let min_buy = props.iter().filter(|p| p.listing_type == ListingType::Buy).map(|p| p.price).min().unwrap();
        assert!(min_buy > max_rent, "buy {min_buy} vs rent {max_rent}");
        for lt in ListingType::ALL {
            let logs: Vec<f64> = props
                .iter()
                .filter(|p| p.listing_type == lt)
                .map(|p| (p.price as f64 / p.built_up_area).ln())
                .collect();
            let n = logs.len() as f64;
            let mean = logs.iter().sum::<f64>() / n;
            let sd = (logs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
            assert!((mean - median_price_per_sqft(lt).ln()).abs() < 0.02, "{lt} mean {mean}");
            assert!((sd - PRICE_SIGMA).abs() < 0.03, "{lt} sd {sd}");
        }
        for (i, a) in ApartmentType::ALL.into_iter().enumerate() {
            let share = props.iter().filter(|p| p.apartment_type == a).count() as f64 / props.len() as f64;
            assert!((share - APARTMENT_MIX[i]).abs() < 0.015, "{a:?} {share}");
        }
    }

    #[test]
    fn every_locality_gets_twenty() {
        let props = gen_properties(&CatalogParams { count: 2_000, ..CatalogParams::default() });
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for p in &props {
            *counts.entry(&p.locality).or_default() += 1;
        }
        assert_eq!(counts.len(), locality_plan(2_000, 8, 60).len());
        assert!(counts.values().all(|&c| c >= MIN_PER_LOCALITY));
    }

    #[test]
    fn same_seed_same_world_and_zero_duration_is_empty() {
        let a = World::generate(small());
        let b = World::generate(small());
        assert_eq!(a.properties, b.properties);
        assert_eq!(a.events, b.events);
        assert!(!a.events.is_empty());
        let mut z = small();
        z.duration = Span::from_millis(0);
        assert!(World::generate(z).events.is_empty());
    }

    #[test]
    fn per_user_order_and_catalog_consistency() {
        let w = World::generate(small());
        let by_id: HashMap<&PropertyId, &Property> = w.properties.iter().map(|p| (&p.id, p)).collect();
        let mut last: HashMap<&UserId, Timestamp> = HashMap::new();
        for e in &w.events {
            let p = by_id[&e.property_id];
            assert_eq!(p.listing_type, e.listing_type);
            assert!(p.active);
            let prev = last.insert(&e.user_id, e.timestamp);
            assert!(prev.is_none_or(|t| t <= e.timestamp));
            assert!(e.timestamp >= w.params.start && e.timestamp < w.end());
        }
    }

    #[test]
    fn preferences_are_unit_and_non_negative() {
        let w = World::generate(small());
        let idx = w.index();
        for u in &w.users {
            for period in 0..3 {
                let p = u.preference_in(&idx, period);
                assert!((p.norm() - 1.0).abs() < 1e-12);
                assert!(p.entries().iter().all(|&(_, v)| v >= 0.0));
            }
        }
    }

    #[test]
    fn funnel_tracks_conversion_column() {
        let f = Funnel::default();
        for a in Action::ALL {
            let (buy, rent) = a.conversion_rate_pct();
            let target = (buy + rent) / 200.0;
            assert!((f.conversion_after(a) - target).abs() < 0.06, "{a:?}: {} vs {target}", f.conversion_after(a));
        }
    }
}
