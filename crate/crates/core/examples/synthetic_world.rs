//! Generates a synthetic world and prints its shape.
//!
//! ```text
//! cargo run --release -p proprec-core --example synthetic_world -- 100000 200000 7
//! ```

use std::collections::{BTreeMap, HashSet};
use std::time::Instant;

use proprec::datagen::{World, WorldParams};
use proprec::domain::{Action, ListingType, Span};

fn main() {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let properties = args.first().copied().unwrap_or(10_000) as usize;
    let users = args.get(1).copied().unwrap_or(20_000) as usize;
    let days = args.get(2).copied().unwrap_or(7) as i64;

    let started = Instant::now();
    let world = World::generate(WorldParams::sized(properties, users, Span::days(days), 42));
    println!("generated in {:.1?}", started.elapsed());
    println!("properties {}  users {}  events {}", world.properties.len(), world.users.len(), world.events.len());

    let mut actions: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &world.events {
        *actions.entry(e.action.as_str()).or_default() += 1;
    }
    for (a, n) in &actions {
        println!("  {a:<24} {n}");
    }
    for lt in ListingType::ALL {
        let mut distinct: BTreeMap<&str, HashSet<&str>> = BTreeMap::new();
        for e in world.events.iter().filter(|e| e.listing_type == lt) {
            distinct.entry(e.user_id.as_str()).or_default().insert(e.property_id.as_str());
        }
        let five = distinct.values().filter(|s| s.len() >= 5).count();
        let crf = world.events.iter().filter(|e| e.listing_type == lt && e.action == Action::SubmittedCrf).count();
        println!("{lt}: active users {}  with >= 5 properties {}  leads {}", distinct.len(), five, crf);
    }
}
