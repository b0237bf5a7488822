//! Weighted interaction matrix and ALS factorization for long-term users.
//!
//! ```text
//! cargo run --release -p proprec-core --example collaborative_als
//! ```

use proprec::collab::{recommend_collab, train_collab, CollabConfig, WeightingScheme};
use proprec::datagen::{World, WorldParams};
use proprec::domain::{Catalog, ListingType, SearchFilter, Span};

fn main() {
    let world = World::generate(WorldParams::sized(5_000, 5_000, Span::days(7), 21));
    let window = (world.params.start, world.end());
    let catalog = Catalog::new(world.properties.clone()).expect("generated catalog is valid");

    for scheme in [WeightingScheme::Linear, WeightingScheme::exponential_decay(), WeightingScheme::TfIdf] {
        let config = CollabConfig { scheme, ..CollabConfig::default() };
        let model = train_collab(&world.events, ListingType::Buy, window, &config).expect("enough buy events");
        let h = &model.header;
        println!(
            "{:<8} {} users x {} items, {} entries; rmse {:.3} -> {:.3}",
            scheme.name(),
            h.users,
            h.items,
            h.nnz,
            h.rmse_trace[0],
            model.final_rmse()
        );
    }

    let model = train_collab(&world.events, ListingType::Buy, window, &CollabConfig::default()).expect("trained");
    let e = world.events.iter().rev().find(|e| e.listing_type == ListingType::Buy && model.covers(&e.user_id)).expect("covered user");
    let p = catalog.get(&e.property_id).expect("catalog listing");
    let filter = SearchFilter::new(&p.city, &p.locality, ListingType::Buy).with_top_k(6);
    println!("{} in {}:", e.user_id, p.locality);
    for it in recommend_collab(&e.user_id, &filter, &model, &catalog).expect("candidates") {
        println!("  {} predicted {:.3}", it.property_id, it.score);
    }
}
