use std::collections::{BTreeMap, HashSet};

use super::split::{checkpoint_split, group_by_user};
use super::{map_at_k, ndcg, Accumulator, EvalError, MetricReport};
use crate::collab::{recommend_collab, train_collab_at, CollabConfig, WeightingScheme};
use crate::content::{build_content_snapshot, recommend_content, ContentTraining, Horizon};
use crate::domain::{Catalog, InteractionEvent, ListingType, PropertyId, Property, SearchFilter, Span};
use crate::features::{BinConfig, FeatureSpace};
use crate::response::ScoredItem;

/// Search filter an evaluated user would plausibly send: the locality they
/// touched most in training, ties broken by name.
pub fn eval_filter<'a>(
    train: impl IntoIterator<Item = &'a InteractionEvent>,
    catalog: &Catalog,
    listing_type: ListingType,
    k: usize,
) -> Option<SearchFilter> {
    let mut counts: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for e in train {
        if let Some(p) = catalog.get(&e.property_id).filter(|p| p.listing_type == listing_type) {
            *counts.entry((p.locality.as_str(), p.city.as_str())).or_default() += 1;
        }
    }
    let best = counts.iter().max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))?.0;
    Some(SearchFilter::new(best.1, best.0, listing_type).with_top_k(k))
}

fn ids(items: Vec<ScoredItem>) -> Vec<PropertyId> {
    items.into_iter().map(|i| i.property_id).collect()
}

fn score(acc: &mut Accumulator, ranked: &[PropertyId], relevant: &HashSet<PropertyId>, k: usize) {
    match (map_at_k(ranked, relevant, k), ndcg(ranked, relevant, k)) {
        (Ok(m), Ok(n)) => acc.push(m, n),
        _ => acc.skip(),
    }
}

#[derive(Clone, Debug)]
pub struct RecencyParams {
    pub windows: Vec<Span>,
    pub k: usize,
    pub bins: BinConfig,
    pub listing_types: Vec<ListingType>,
}

impl Default for RecencyParams {
    fn default() -> Self {
        RecencyParams {
            windows: vec![Span::minutes(5), Span::minutes(10), Span::minutes(20), Span::minutes(30)],
            k: 6,
            bins: BinConfig::default(),
            listing_types: ListingType::ALL.to_vec(),
        }
    }
}

/// For each window `x`, slides over the log in steps of `x`, trains a
/// short-term content snapshot on `[t, t+x)` and scores each profiled user's
/// ranking against what they touched in `[t+x, t+2x)`.
pub fn run_recency_experiment(
    events: &[InteractionEvent],
    catalog: &Catalog,
    params: &RecencyParams,
) -> Result<MetricReport, EvalError> {
    let largest = params.windows.iter().map(|w| w.as_millis()).max().unwrap_or(0);
    let start = events.iter().map(|e| e.timestamp).min();
    let end = events.iter().map(|e| e.timestamp).max().map(|t| t + 1);
    let (Some(start), Some(end)) = (start, end) else {
        return Err(EvalError::InsufficientSpan { span_ms: 0, needed_ms: 2 * largest });
    };
    if end - start < 2 * largest {
        return Err(EvalError::InsufficientSpan { span_ms: end - start, needed_ms: 2 * largest });
    }

    let mut rows = Vec::new();
    for &lt in &params.listing_types {
        let mut sorted: Vec<&InteractionEvent> = events.iter().filter(|e| e.listing_type == lt).collect();
        sorted.sort_by_key(|e| e.timestamp);
        let slice = |a: i64, b: i64| -> Vec<InteractionEvent> {
            let lo = sorted.partition_point(|e| e.timestamp < a);
            let hi = sorted.partition_point(|e| e.timestamp < b);
            sorted[lo..hi].iter().map(|e| (*e).clone()).collect()
        };
        let space = FeatureSpace::new(lt, params.bins.clone());
        let props: Vec<&Property> = catalog.active(lt).collect();
        let base_params = ContentTraining {
            horizon: Horizon::ShortTerm,
            window: (start, start),
            built_at: start,
            space: &space,
            min_distinct_properties: 0,
        };
        let base = build_content_snapshot(&[], &props, &base_params);

        for window in &params.windows {
            let x = window.as_millis();
            let mut acc = Accumulator::default();
            let mut t = start;
            while t + 2 * x <= end {
                let train = slice(t, t + x);
                let test = slice(t + x, t + 2 * x);
                let training = ContentTraining { window: (t, t + x), built_at: t + x, ..base_params.clone() };
                let snap = base.retrained(&train, &training);
                let train_by_user = group_by_user(&train);
                let test_by_user = group_by_user(&test);
                for user in snap.profiles.keys() {
                    let relevant: HashSet<PropertyId> =
                        test_by_user.get(user).into_iter().flatten().map(|e| e.property_id.clone()).collect();
                    if relevant.is_empty() {
                        acc.skip();
                        continue;
                    }
                    let ranked = eval_filter(train_by_user.get(user).into_iter().flatten(), catalog, lt, params.k)
                        .and_then(|f| recommend_content(user, &f, &snap).ok())
                        .map(ids)
                        .unwrap_or_default();
                    score(&mut acc, &ranked, &relevant, params.k);
                }
                t += x;
            }
            rows.push(acc.row(format!("recency_{window}"), lt));
        }
    }
    Ok(MetricReport { k: params.k, rows })
}

#[derive(Clone, Debug)]
pub struct WeightingParams {
    pub schemes: Vec<WeightingScheme>,
    pub k: usize,
    pub collab: CollabConfig,
    pub seed: u64,
    pub bounds: (f64, f64),
    pub listing_types: Vec<ListingType>,
}

impl Default for WeightingParams {
    fn default() -> Self {
        WeightingParams {
            schemes: vec![WeightingScheme::Linear, WeightingScheme::exponential_decay(), WeightingScheme::TfIdf],
            k: 6,
            collab: CollabConfig::default(),
            seed: 42,
            bounds: (0.2, 0.8),
            listing_types: ListingType::ALL.to_vec(),
        }
    }
}

/// One checkpoint split per listing type; per scheme, trains ALS on the
/// train side and scores covered users against their held-out interactions.
pub fn run_weighting_experiment(
    events: &[InteractionEvent],
    catalog: &Catalog,
    params: &WeightingParams,
) -> Result<MetricReport, EvalError> {
    let mut rows = Vec::new();
    for &lt in &params.listing_types {
        let by_user = group_by_user(events.iter().filter(|e| e.listing_type == lt));
        let split = checkpoint_split(&by_user, params.seed, params.bounds);
        let train = split.train_events();
        let Some(first) = train.first().map(|e| e.timestamp) else {
            return Err(crate::collab::CollabError::EmptyMatrix.into());
        };
        // Decay ages count back from the latest training event.
        let latest = train.iter().map(|e| e.timestamp).max().unwrap_or(first);
        for &scheme in &params.schemes {
            let config = CollabConfig { scheme, ..params.collab.clone() };
            let model = train_collab_at(&train, lt, (first, latest + 1), latest, &config)?;
            let mut acc = Accumulator::default();
            for (user, s) in &split.users {
                if !model.covers(user) {
                    continue;
                }
                let relevant: HashSet<PropertyId> = s.test.iter().map(|e| e.property_id.clone()).collect();
                if relevant.is_empty() {
                    acc.skip();
                    continue;
                }
                let ranked = eval_filter(&s.train, catalog, lt, params.k)
                    .and_then(|f| recommend_collab(user, &f, &model, catalog).ok())
                    .map(ids)
                    .unwrap_or_default();
                score(&mut acc, &ranked, &relevant, params.k);
            }
            rows.push(acc.row(scheme.name(), lt));
        }
    }
    Ok(MetricReport { k: params.k, rows })
}
