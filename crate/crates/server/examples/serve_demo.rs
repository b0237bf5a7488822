//! Serves a small synthetic world on port 8080 with the clock starting at the
//! end of its event log, so every model has something to say.
//!
//! ```text
//! cargo run --release -p proprec-server --example serve_demo
//! curl 'http://127.0.0.1:8080/v1/health'
//! ```

use std::sync::Arc;
use std::time::Duration;

use proprec::config::EngineConfig;
use proprec::datagen::{World, WorldParams};
use proprec::domain::{Catalog, Span};
use proprec::pipeline::Pipeline;
use proprec_server::bench::BenchQuery;
use proprec_server::{serve, AppState, OffsetClock};

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt().with_env_filter("info").init();
    let mut params = WorldParams::sized(5_000, 3_000, Span::hours(3), 1);
    params.sessions.sessions_per_day = 40.0;
    let world = World::generate(params);
    let now = world.end();
    let pipeline = Pipeline::in_memory(Catalog::new(world.properties.clone())?, EngineConfig::default());
    pipeline.ingest(world.events.clone())?;
    pipeline.bootstrap(now)?;

    let e = world.events.last().expect("events");
    let p = pipeline.catalog().get(&e.property_id).expect("catalog listing");
    let q = BenchQuery { user_id: e.user_id.to_string(), city: p.city.clone(), locality: p.locality.clone(), listing_type: p.listing_type };
    println!("try:");
    println!("  curl 'http://127.0.0.1:8080{}'", q.path());
    println!("  curl -X POST 'http://127.0.0.1:8080/v1/admin/retrain?model=content_short'");
    println!("  curl 'http://127.0.0.1:8080/v1/admin/jobs'");

    let state = AppState::new(Arc::new(pipeline), Arc::new(OffsetClock::starting_at(now)));
    serve(state, "127.0.0.1:8080".parse()?, Duration::from_secs(30)).await
}
