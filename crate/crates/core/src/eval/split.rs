use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::domain::{InteractionEvent, UserId};

#[derive(Clone, Debug, PartialEq)]
pub struct UserSplit {
    pub checkpoint: usize,
    pub train: Vec<InteractionEvent>,
    pub test: Vec<InteractionEvent>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalSplit {
    pub seed: u64,
    pub users: BTreeMap<UserId, UserSplit>,
    /// Users with fewer than two events.
    pub too_few_events: Vec<UserId>,
}

impl EvalSplit {
    pub fn train_events(&self) -> Vec<InteractionEvent> {
        let mut out: Vec<InteractionEvent> = self.users.values().flat_map(|s| s.train.iter().cloned()).collect();
        out.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.user_id.cmp(&b.user_id)));
        out
    }
}

fn user_rng(seed: u64, user: &UserId) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(user.as_str().as_bytes());
    ChaCha8Rng::seed_from_u64(u64::from_le_bytes(h.finalize()[..8].try_into().expect("8 bytes")))
}

/// Legal checkpoint range for `n` events: `[ceil(lo·n), floor(hi·n)]` kept
/// strictly inside the sequence.
pub fn checkpoint_bounds(n: usize, bounds: (f64, f64)) -> (usize, usize) {
    let lo = ((bounds.0 * n as f64).ceil() as usize).clamp(1, n - 1);
    let hi = ((bounds.1 * n as f64).floor() as usize).clamp(1, n - 1);
    (lo, hi.max(lo))
}

/// Splits each user's time-ordered events at a seeded random checkpoint.
/// Events before the checkpoint train, the rest test. The draw depends only
/// on the seed and the user id, so adding users does not move anyone else's
/// checkpoint.
pub fn checkpoint_split(
    events_by_user: &BTreeMap<UserId, Vec<InteractionEvent>>,
    seed: u64,
    bounds: (f64, f64),
) -> EvalSplit {
    let mut users = BTreeMap::new();
    let mut too_few_events = Vec::new();
    for (user, events) in events_by_user {
        let n = events.len();
        if n < 2 {
            too_few_events.push(user.clone());
            continue;
        }
        let (lo, hi) = checkpoint_bounds(n, bounds);
        let checkpoint = user_rng(seed, user).gen_range(lo..=hi);
        users.insert(
            user.clone(),
            UserSplit { checkpoint, train: events[..checkpoint].to_vec(), test: events[checkpoint..].to_vec() },
        );
    }
    EvalSplit { seed, users, too_few_events }
}

/// Groups events by user, each list in timestamp order (stable on ties).
pub fn group_by_user<'a>(events: impl IntoIterator<Item = &'a InteractionEvent>) -> BTreeMap<UserId, Vec<InteractionEvent>> {
    let mut out: BTreeMap<UserId, Vec<InteractionEvent>> = BTreeMap::new();
    for e in events {
        out.entry(e.user_id.clone()).or_default().push(e.clone());
    }
    for list in out.values_mut() {
        list.sort_by_key(|e| e.timestamp);
    }
    out
}
