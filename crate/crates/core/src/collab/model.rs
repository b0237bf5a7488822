use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::als::{als_train, AlsFactors};
use super::matrix::{build_matrix, Aggregation, MatrixParams};
use super::weighting::WeightingScheme;
use super::{CollabConfig, CollabError};
use crate::domain::{Action, Catalog, InteractionEvent, ListingType, PropertyId, SearchFilter, Timestamp, UserId};
use crate::response::{top_k, ScoredItem};

pub const FACTOR_MODEL_MAGIC: &[u8; 4] = b"PRFM";
pub const FACTOR_MODEL_VERSION: u32 = 1;

/// JSON header of the binary model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub listing_type: ListingType,
    pub rank: usize,
    pub lambda: f64,
    pub iterations: usize,
    pub scheme: WeightingScheme,
    pub aggregation: Aggregation,
    pub trained_at: Timestamp,
    pub window: (Timestamp, Timestamp),
    pub users: usize,
    pub items: usize,
    pub nnz: usize,
    pub rmse_trace: Vec<f64>,
    pub objective_trace: Vec<f64>,
}

/// Trained factors plus the index maps needed to serve them.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorModel {
    pub header: ModelHeader,
    /// Sorted.
    pub users: Vec<UserId>,
    /// Sorted.
    pub items: Vec<PropertyId>,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    /// Properties each covered user submitted a CRF on in the window.
    pub converted: BTreeMap<UserId, BTreeSet<PropertyId>>,
    item_index: HashMap<PropertyId, u32>,
}

impl FactorModel {
    pub fn new(
        header: ModelHeader,
        users: Vec<UserId>,
        items: Vec<PropertyId>,
        factors: AlsFactors,
        converted: BTreeMap<UserId, BTreeSet<PropertyId>>,
    ) -> Result<Self, CollabError> {
        let rank = header.rank;
        if factors.user_factors.len() != users.len() * rank || factors.item_factors.len() != items.len() * rank {
            return Err(CollabError::Format("factor matrix shape does not match index maps".into()));
        }
        if !users.windows(2).all(|w| w[0] < w[1]) || !items.windows(2).all(|w| w[0] < w[1]) {
            return Err(CollabError::Format("index maps must be strictly sorted".into()));
        }
        if factors.user_factors.iter().chain(&factors.item_factors).any(|x| !x.is_finite()) {
            return Err(CollabError::Format("non-finite factor".into()));
        }
        let item_index = items.iter().enumerate().map(|(i, p)| (p.clone(), i as u32)).collect();
        Ok(FactorModel {
            header,
            users,
            items,
            user_factors: factors.user_factors,
            item_factors: factors.item_factors,
            converted,
            item_index,
        })
    }

    pub fn rank(&self) -> usize {
        self.header.rank
    }

    pub fn covers(&self, user: &UserId) -> bool {
        self.users.binary_search(user).is_ok()
    }

    pub fn user_factor(&self, user: &UserId) -> Option<&[f64]> {
        let r = self.users.binary_search(user).ok()?;
        Some(&self.user_factors[r * self.rank()..(r + 1) * self.rank()])
    }

    pub fn item_factor(&self, item: &PropertyId) -> Option<&[f64]> {
        let c = *self.item_index.get(item)? as usize;
        Some(&self.item_factors[c * self.rank()..(c + 1) * self.rank()])
    }

    pub fn predict(&self, user: &UserId, item: &PropertyId) -> Option<f64> {
        let x = self.user_factor(user)?;
        let y = self.item_factor(item)?;
        Some(x.iter().zip(y).map(|(a, b)| a * b).sum())
    }

    pub fn final_rmse(&self) -> f64 {
        self.header.rmse_trace.last().copied().unwrap_or(f64::NAN)
    }

    /// Every admissible candidate with its predicted score, unsorted.
    pub fn score_all(&self, user: &UserId, filter: &SearchFilter, catalog: &Catalog) -> Result<Vec<ScoredItem>, CollabError> {
        let x = self.user_factor(user).ok_or_else(|| CollabError::UserNotCovered(user.clone()))?;
        let excluded = self.converted.get(user);
        Ok(catalog
            .matching(filter)
            .filter(|p| excluded.is_none_or(|set| !set.contains(&p.id)))
            .filter_map(|p| {
                let y = self.item_factor(&p.id)?;
                Some(ScoredItem::new(p.id.clone(), x.iter().zip(y).map(|(a, b)| a * b).sum()))
            })
            .collect())
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<(), CollabError> {
        w.write_all(FACTOR_MODEL_MAGIC)?;
        w.write_all(&FACTOR_MODEL_VERSION.to_le_bytes())?;
        let header = serde_json::to_vec(&self.header).map_err(|e| CollabError::Format(e.to_string()))?;
        write_len(&mut w, header.len())?;
        w.write_all(&header)?;
        write_ids(&mut w, self.users.iter().map(|u| u.as_str()), self.users.len())?;
        write_ids(&mut w, self.items.iter().map(|p| p.as_str()), self.items.len())?;
        for x in self.user_factors.iter().chain(&self.item_factors) {
            w.write_all(&x.to_le_bytes())?;
        }
        write_len(&mut w, self.converted.len())?;
        for (user, props) in &self.converted {
            write_str(&mut w, user.as_str())?;
            write_ids(&mut w, props.iter().map(|p| p.as_str()), props.len())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out).expect("writing to a Vec cannot fail");
        out
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, CollabError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != FACTOR_MODEL_MAGIC {
            return Err(CollabError::Format("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != FACTOR_MODEL_VERSION {
            return Err(CollabError::Format(format!("unsupported version {version}")));
        }
        let header_len = read_u32(&mut r)? as usize;
        let mut header = vec![0u8; header_len];
        r.read_exact(&mut header)?;
        let header: ModelHeader = serde_json::from_slice(&header).map_err(|e| CollabError::Format(e.to_string()))?;
        let users: Vec<UserId> = read_ids(&mut r)?.into_iter().map(UserId::from).collect();
        let items: Vec<PropertyId> = read_ids(&mut r)?.into_iter().map(PropertyId::from).collect();
        if users.len() != header.users || items.len() != header.items {
            return Err(CollabError::Format("index map sizes disagree with header".into()));
        }
        let read_floats = |r: &mut dyn Read, n: usize| -> Result<Vec<f64>, CollabError> {
            let mut buf = [0u8; 8];
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                r.read_exact(&mut buf)?;
                out.push(f64::from_le_bytes(buf));
            }
            Ok(out)
        };
        let user_factors = read_floats(&mut r, users.len() * header.rank)?;
        let item_factors = read_floats(&mut r, items.len() * header.rank)?;
        let n_converted = read_u32(&mut r)? as usize;
        let mut converted = BTreeMap::new();
        for _ in 0..n_converted {
            let user = UserId::from(read_str(&mut r)?);
            let props = read_ids(&mut r)?.into_iter().map(PropertyId::from).collect();
            converted.insert(user, props);
        }
        let factors = AlsFactors {
            rank: header.rank,
            user_factors,
            item_factors,
            rmse_trace: header.rmse_trace.clone(),
            objective_trace: header.objective_trace.clone(),
        };
        FactorModel::new(header, users, items, factors, converted)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CollabError> {
        FactorModel::read_from(bytes)
    }
}

fn write_len(w: &mut impl Write, n: usize) -> Result<(), CollabError> {
    let n = u32::try_from(n).map_err(|_| CollabError::Format("section longer than u32".into()))?;
    w.write_all(&n.to_le_bytes())?;
    Ok(())
}

fn write_str(w: &mut impl Write, s: &str) -> Result<(), CollabError> {
    write_len(w, s.len())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn write_ids<'a>(w: &mut impl Write, ids: impl Iterator<Item = &'a str>, n: usize) -> Result<(), CollabError> {
    write_len(w, n)?;
    for id in ids {
        write_str(w, id)?;
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32, CollabError> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_str(r: &mut impl Read) -> Result<String, CollabError> {
    let n = read_u32(r)? as usize;
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| CollabError::Format("id is not utf-8".into()))
}

fn read_ids(r: &mut impl Read) -> Result<Vec<String>, CollabError> {
    let n = read_u32(r)? as usize;
    (0..n).map(|_| read_str(r)).collect()
}

/// Builds the matrix for one listing type over `window` and factorizes it.
/// Decay ages are measured from the window end.
pub fn train_collab(
    events: &[InteractionEvent],
    listing_type: ListingType,
    window: (Timestamp, Timestamp),
    config: &CollabConfig,
) -> Result<FactorModel, CollabError> {
    train_collab_at(events, listing_type, window, window.1, config)
}

/// [`train_collab`] with an explicit decay reference time.
pub fn train_collab_at(
    events: &[InteractionEvent],
    listing_type: ListingType,
    window: (Timestamp, Timestamp),
    reference_time: Timestamp,
    config: &CollabConfig,
) -> Result<FactorModel, CollabError> {
    let in_window: Vec<InteractionEvent> = events
        .iter()
        .filter(|e| e.listing_type == listing_type && e.timestamp >= window.0 && e.timestamp < window.1)
        .cloned()
        .collect();
    let params = MatrixParams {
        listing_type,
        scheme: config.scheme,
        aggregation: config.aggregation,
        reference_time,
        min_distinct_properties: config.min_distinct_properties,
    };
    let matrix = build_matrix(&in_window, &params)?;
    let factors = als_train(&matrix, &config.als_params())?;

    let mut converted: BTreeMap<UserId, BTreeSet<PropertyId>> = BTreeMap::new();
    for e in &in_window {
        if e.action == Action::SubmittedCrf && matrix.users.binary_search(&e.user_id).is_ok() {
            converted.entry(e.user_id.clone()).or_default().insert(e.property_id.clone());
        }
    }
    let header = ModelHeader {
        listing_type,
        rank: config.rank,
        lambda: config.lambda,
        iterations: config.iterations,
        scheme: config.scheme,
        aggregation: config.aggregation,
        trained_at: window.1,
        window,
        users: matrix.users.len(),
        items: matrix.properties.len(),
        nnz: matrix.nnz(),
        rmse_trace: factors.rmse_trace.clone(),
        objective_trace: factors.objective_trace.clone(),
    };
    FactorModel::new(header, matrix.users, matrix.properties, factors, converted)
}

/// Top `filter.top_k` properties by predicted score.
pub fn recommend_collab(
    user_id: &UserId,
    filter: &SearchFilter,
    model: &FactorModel,
    catalog: &Catalog,
) -> Result<Vec<ScoredItem>, CollabError> {
    let scored = model.score_all(user_id, filter, catalog)?;
    if scored.is_empty() {
        return Err(CollabError::NoCandidates);
    }
    Ok(top_k(scored, filter.top_k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ApartmentType, Furnishing, ProfileType, Property};

    fn prop(id: &str) -> Property {
        Property {
            id: id.into(),
            city: "Pune".into(),
            locality: "Baner".into(),
            apartment_type: ApartmentType::Bhk2,
            furnishing: Furnishing::Semi,
            profile_type: ProfileType::Owner,
            price: 5_000_000,
            built_up_area: 900.0,
            age_years: 2.0,
            floor_number: 3,
            image_count: 5,
            listing_type: ListingType::Buy,
            created_at: 0,
            active: true,
        }
    }

    fn scalar_model() -> FactorModel {
        let header = ModelHeader {
            listing_type: ListingType::Buy,
            rank: 1,
            lambda: 0.1,
            iterations: 0,
            scheme: WeightingScheme::Linear,
            aggregation: Aggregation::Max,
            trained_at: 0,
            window: (0, 0),
            users: 1,
            items: 2,
            nnz: 2,
            rmse_trace: vec![0.5],
            objective_trace: vec![1.0],
        };
        let factors = AlsFactors {
            rank: 1,
            user_factors: vec![2.0],
            item_factors: vec![3.0, 1.0],
            rmse_trace: vec![0.5],
            objective_trace: vec![1.0],
        };
        FactorModel::new(header, vec!["u".into()], vec!["p".into(), "q".into()], factors, BTreeMap::new()).unwrap()
    }

    #[test]
    fn scalar_dot_products() {
        let catalog = Catalog::new(vec![prop("p"), prop("q"), prop("r")]).unwrap();
        let model = scalar_model();
        let f = SearchFilter::new("Pune", "Baner", ListingType::Buy);
        let items = recommend_collab(&"u".into(), &f, &model, &catalog).unwrap();
        assert_eq!(items, vec![ScoredItem::new("p".into(), 6.0), ScoredItem::new("q".into(), 2.0)]);
    }

    #[test]
    fn uncovered_and_no_candidates() {
        let catalog = Catalog::new(vec![prop("r")]).unwrap();
        let model = scalar_model();
        let f = SearchFilter::new("Pune", "Baner", ListingType::Buy);
        assert!(matches!(recommend_collab(&"x".into(), &f, &model, &catalog), Err(CollabError::UserNotCovered(_))));
        assert!(matches!(recommend_collab(&"u".into(), &f, &model, &catalog), Err(CollabError::NoCandidates)));
    }

    #[test]
    fn binary_round_trip() {
        let mut model = scalar_model();
        model.converted.insert("u".into(), ["p".into()].into_iter().collect());
        let bytes = model.to_bytes();
        assert_eq!(&bytes[..4], b"PRFM");
        let back = FactorModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.to_bytes(), bytes);
        assert!(FactorModel::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn converted_items_are_excluded() {
        let catalog = Catalog::new(vec![prop("p"), prop("q")]).unwrap();
        let mut model = scalar_model();
        model.converted.insert("u".into(), ["p".into()].into_iter().collect());
        let f = SearchFilter::new("Pune", "Baner", ListingType::Buy);
        let items = recommend_collab(&"u".into(), &f, &model, &catalog).unwrap();
        assert_eq!(items, vec![ScoredItem::new("q".into(), 2.0)]);
    }
}
