//! Short-term content profiles: what a user browsed in the last ten minutes
//! decides what they see next.
//!
//! ```text
//! cargo run --release -p proprec-core --example content_filtering
//! ```

use proprec::content::{build_content_snapshot, recommend_content, ContentTraining, Horizon};
use proprec::datagen::{World, WorldParams};
use proprec::domain::{ListingType, Property, SearchFilter, Span};
use proprec::features::{BinConfig, FeatureSpace};

fn main() {
    let mut params = WorldParams::sized(4_000, 2_000, Span::hours(2), 3);
    params.sessions.sessions_per_day = 48.0;
    let world = World::generate(params);
    let now = world.end();
    let lt = ListingType::Buy;
    let space = FeatureSpace::new(lt, BinConfig::default());
    println!("buy feature space: {} dimensions", space.dimension());

    let window = (now - Span::minutes(10).as_millis(), now);
    let recent: Vec<_> = world.events.iter().filter(|e| e.timestamp >= window.0).cloned().collect();
    let props: Vec<&Property> = world.properties.iter().filter(|p| p.listing_type == lt).collect();
    let snap = build_content_snapshot(
        &recent,
        &props,
        &ContentTraining { horizon: Horizon::ShortTerm, window, built_at: now, space: &space, min_distinct_properties: 1 },
    );
    println!("{} users profiled from {} events in the last 10 minutes", snap.profiles.len(), recent.len());

    let Some((user, _)) = snap.profiles.iter().next() else {
        println!("nobody browsed buy listings in the window");
        return;
    };
    let last = recent.iter().rev().find(|e| &e.user_id == user && e.listing_type == lt).expect("profiled users have events");
    let seen = world.properties.iter().find(|p| p.id == last.property_id).expect("catalog listing");
    println!("{user} last looked at {} ({:?}, {} sqft, {})", seen.id, seen.apartment_type, seen.built_up_area, seen.price);

    let filter = SearchFilter::new(&seen.city, &seen.locality, lt).with_top_k(6);
    match recommend_content(user, &filter, &snap) {
        Ok(items) => {
            for it in items {
                let p = snap.property(&it.property_id).expect("indexed");
                println!("  {} cos {:.3}  {:?} {} sqft {}", p.id, it.score, p.apartment_type, p.built_up_area, p.price);
            }
        }
        Err(e) => println!("no recommendations: {e}"),
    }
}
