//! Offline experiments: short-term window length and collaborative weighting
//! schemes, scored by MAP@6 and NDCG@6.
//!
//! ```text
//! cargo run --release -p proprec-core --example offline_evaluation
//! ```

use proprec::datagen::{World, WorldParams};
use proprec::domain::{Catalog, Span};
use proprec::eval::{run_recency_experiment, run_weighting_experiment, RecencyParams, WeightingParams};

fn main() {
    let mut params = WorldParams::sized(4_000, 5_000, Span::hours(2), 1);
    params.sessions.sessions_per_day = 144.0;
    params.sessions.rate_sigma = 0.0;
    params.sessions.mean_views = 4.0;
    params.sessions.max_localities = 1;
    params.sessions.drift = Some(Span::minutes(10));
    let drifting = World::generate(params);
    let catalog = Catalog::new(drifting.properties.clone()).expect("valid catalog");
    println!("recency windows, preferences drifting every 10 minutes");
    let report = run_recency_experiment(&drifting.events, &catalog, &RecencyParams::default()).expect("recency run");
    print!("{}", report.to_table());

    let week = World::generate(WorldParams::sized(5_000, 5_000, Span::days(7), 2));
    let catalog = Catalog::new(week.properties.clone()).expect("valid catalog");
    println!("\nweighting schemes on a week of events");
    let report = run_weighting_experiment(&week.events, &catalog, &WeightingParams::default()).expect("weighting run");
    print!("{}", report.to_table());
}
