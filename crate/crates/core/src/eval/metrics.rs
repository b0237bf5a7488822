use std::collections::HashSet;

use super::EvalError;
use crate::domain::PropertyId;

/// Average precision over the first `k` ranks, normalized by
/// `min(|relevant|, k)`.
pub fn map_at_k(ranked: &[PropertyId], relevant: &HashSet<PropertyId>, k: usize) -> Result<f64, EvalError> {
    if relevant.is_empty() {
        return Err(EvalError::EmptyRelevant);
    }
    let k = k.max(1);
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, id) in ranked.iter().take(k).enumerate() {
        if relevant.contains(id) {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / relevant.len().min(k) as f64)
}

/// Binary-gain NDCG over the first `k` ranks.
pub fn ndcg(ranked: &[PropertyId], relevant: &HashSet<PropertyId>, k: usize) -> Result<f64, EvalError> {
    if relevant.is_empty() {
        return Err(EvalError::EmptyRelevant);
    }
    let k = k.max(1);
    let discount = |i: usize| 1.0 / ((i + 2) as f64).log2();
    let dcg: f64 = ranked.iter().take(k).enumerate().filter(|(_, id)| relevant.contains(*id)).map(|(i, _)| discount(i)).sum();
    let ideal: f64 = (0..relevant.len().min(k)).map(discount).sum();
    Ok(dcg / ideal)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(v: &[&str]) -> Vec<PropertyId> {
        v.iter().map(|s| PropertyId::from(*s)).collect()
    }

    fn set(v: &[&str]) -> HashSet<PropertyId> {
        v.iter().map(|s| PropertyId::from(*s)).collect()
    }

    #[test]
    fn hand_values() {
        assert_eq!(map_at_k(&ids(&["r", "x1", "x2", "x3", "x4", "x5"]), &set(&["r"]), 6).unwrap(), 1.0);
        assert_eq!(map_at_k(&ids(&["x1", "x2"]), &set(&["r"]), 6).unwrap(), 0.0);
        let ap = map_at_k(&ids(&["x", "r1", "r2"]), &set(&["r1", "r2"]), 3).unwrap();
        assert!((ap - 7.0 / 12.0).abs() < 1e-12);
        let n = ndcg(&ids(&["x", "r"]), &set(&["r"]), 6).unwrap();
        assert!((n - 2f64.log2() / 3f64.log2()).abs() < 1e-12);
        assert_eq!(ndcg(&ids(&["r1", "r2", "x"]), &set(&["r1", "r2"]), 6).unwrap(), 1.0);
        assert_eq!(ndcg(&ids(&["x"]), &set(&["r"]), 6).unwrap(), 0.0);
        assert!(matches!(map_at_k(&ids(&["x"]), &HashSet::new(), 6), Err(EvalError::EmptyRelevant)));
    }
}
