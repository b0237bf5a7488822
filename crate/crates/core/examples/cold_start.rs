//! Cohort scoring and cold-start recommendations for a user with no history.
//!
//! ```text
//! cargo run --release -p proprec-core --example cold_start
//! ```

use proprec::cohort::{build_cohorts, cohorts_for_page, recommend_cold_start, request_seed, score_cohorts, CohortScope, CohortSnapshot};
use proprec::datagen::{World, WorldParams};
use proprec::domain::{ListingType, SearchFilter, Span};
use proprec::features::BinConfig;

fn main() {
    let world = World::generate(WorldParams::sized(5_000, 3_000, Span::days(2), 7));
    let bins = BinConfig::default();
    let now = world.end();
    let lt = ListingType::Rent;

    let cohorts = score_cohorts(build_cohorts(
        world.properties.iter().filter(|p| p.listing_type == lt),
        &world.events,
        &bins,
    ));
    println!("{} rent cohorts", cohorts.len());
    let mut best: Vec<_> = cohorts.values().collect();
    best.sort_by(|a, b| b.score.total_cmp(&a.score));
    for c in best.iter().take(5) {
        println!(
            "  {:<22} {:<5?} {:?} price bin {:>3}: score {:.3}, {} flats, {} leads",
            c.key.locality, c.key.apartment_type, c.key.profile_type, c.key.price_bin, c.score, c.num_flats, c.total_leads
        );
    }

    let snap = CohortSnapshot::new(lt, now, (world.params.start, now), bins, cohorts);
    let p = world.properties.iter().find(|p| p.listing_type == lt).expect("rent listings");
    let filter = SearchFilter::new(&p.city, &p.locality, lt).with_top_k(6);
    // The same user at the same instant always sees the same page.
    let seed = request_seed(42, "first-time-visitor", now);
    let items = recommend_cold_start(&filter, &snap, seed, cohorts_for_page(filter.top_k), CohortScope::Locality)
        .expect("locality has cohorts");
    println!("cold start in {} / {}:", p.city, p.locality);
    for it in items {
        println!("  {} {:.3}", it.property_id, it.score);
    }
}
