//! End-to-end serving: bootstrap every model, then watch the router pick a
//! model per user category.
//!
//! ```text
//! cargo run --release -p proprec-core --example hybrid_routing
//! ```

use std::collections::BTreeMap;

use proprec::config::EngineConfig;
use proprec::datagen::{World, WorldParams};
use proprec::domain::{Catalog, SearchFilter, Span};
use proprec::pipeline::Pipeline;

fn main() {
    let mut params = WorldParams::sized(5_000, 4_000, Span::minutes(210), 5);
    params.sessions.sessions_per_day = 48.0;
    let world = World::generate(params);
    let now = world.end();
    let pipeline = Pipeline::in_memory(Catalog::new(world.properties).expect("valid catalog"), EngineConfig::default());
    let report = pipeline.ingest(world.events.clone()).expect("in-memory ingest");
    println!("ingested {} events", report.accepted);
    for r in pipeline.bootstrap(now).expect("bootstrap") {
        println!("  {:<13} published {} snapshot(s)", r.job.as_str(), r.published.len());
    }

    let mut last = BTreeMap::new();
    for e in &world.events {
        last.insert(e.user_id.clone(), e.property_id.clone());
    }
    let mut seen = BTreeMap::new();
    for (user, pid) in last.iter().chain([(&"never-seen".into(), &world.events[0].property_id)]) {
        let p = pipeline.catalog().get(pid).expect("catalog listing");
        let filter = SearchFilter::new(&p.city, &p.locality, p.listing_type).with_top_k(6);
        let r = pipeline.recommend(user, &filter, now);
        let key = (r.category.as_str(), r.model_used.as_str());
        if seen.insert(key, ()).is_none() {
            let top: Vec<String> = r.items.iter().map(|i| format!("{}:{:.2}", i.property_id, i.score)).collect();
            println!("{:<16} -> {:<13} {user}: {}", key.0, key.1, top.join(" "));
        }
    }
}
