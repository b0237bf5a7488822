//! Recency experiment on drifting and stationary synthetic worlds.

use proprec::datagen::{World, WorldParams};
use proprec::domain::{Catalog, ListingType, Span};
use proprec::eval::{run_recency_experiment, RecencyParams};

fn world(seed: u64, drift: Option<Span>) -> World {
    let mut p = WorldParams::sized(4_000, 5_000, Span::hours(2), seed);
    p.sessions.sessions_per_day = 144.0;
    p.sessions.rate_sigma = 0.0;
    p.sessions.mean_views = 4.0;
    p.sessions.drift = drift;
    // One locality per user, so the search filter can reach everything the
    // user touches and only preference recency separates the windows.
    p.sessions.max_localities = 1;
    World::generate(p)
}

fn five_vs_thirty(seed: u64, drift: Option<Span>) -> (f64, f64) {
    let w = world(seed, drift);
    let catalog = Catalog::new(w.properties.clone()).unwrap();
    let params = RecencyParams { windows: vec![Span::minutes(5), Span::minutes(30)], ..RecencyParams::default() };
    let report = run_recency_experiment(&w.events, &catalog, &params).unwrap();
    let mean = |name: &str| {
        ListingType::ALL.iter().map(|&lt| report.row(name, lt).unwrap().map_at_k).sum::<f64>() / 2.0
    };
    (mean("recency_5m"), mean("recency_30m"))
}

#[test]
fn drift_favours_five_minutes_stationary_does_not() {
    for seed in [3, 4, 5] {
        let (five, thirty) = five_vs_thirty(seed, Some(Span::minutes(10)));
        assert!(five >= thirty, "seed {seed} drifting: 5m {five:.4} < 30m {thirty:.4}");
        let (five, thirty) = five_vs_thirty(seed, None);
        assert!(five < thirty, "seed {seed} stationary: 5m {five:.4} >= 30m {thirty:.4}");
    }
}

#[test]
fn every_window_gets_a_row_per_listing_type() {
    let w = world(9, None);
    let catalog = Catalog::new(w.properties.clone()).unwrap();
    let report = run_recency_experiment(&w.events, &catalog, &RecencyParams::default()).unwrap();
    assert_eq!(report.rows.len(), 8);
    for name in ["recency_5m", "recency_10m", "recency_20m", "recency_30m"] {
        for lt in ListingType::ALL {
            let row = report.row(name, lt).unwrap();
            assert!(row.users_evaluated > 0 && (0.0..=1.0).contains(&row.map_at_k));
        }
    }
}
