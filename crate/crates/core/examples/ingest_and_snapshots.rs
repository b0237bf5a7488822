//! On-disk event log and versioned snapshot store: ingest, retrain, reopen
//! and verify.
//!
//! ```text
//! cargo run --release -p proprec-core --example ingest_and_snapshots
//! ```

use std::sync::Arc;

use proprec::config::EngineConfig;
use proprec::datagen::{World, WorldParams};
use proprec::domain::{Catalog, ListingType, Span};
use proprec::pipeline::Pipeline;
use proprec::store::{ArtifactKind, EventLog, JobKind, SnapshotStore};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join(format!("proprec-example-{}", std::process::id()));
    let world = World::generate(WorldParams::sized(2_000, 1_000, Span::days(1), 9));
    let now = world.end();
    let config = EngineConfig::default();
    let open = || -> Result<Pipeline, Box<dyn std::error::Error>> {
        Ok(Pipeline::new(
            Arc::new(Catalog::new(world.properties.clone())?),
            Arc::new(EventLog::open(dir.join("log"))?),
            Arc::new(SnapshotStore::open(dir.join("snapshots"), config.snapshot_retention)?),
            config.clone(),
        ))
    };

    let pipeline = open()?;
    let mut bad = world.events[0].clone();
    bad.property_id = "no-such-listing".into();
    let report = pipeline.ingest(vec![world.events[0].clone(), bad])?;
    println!("accepted {}, rejected {:?}", report.accepted, report.rejected.iter().map(|r| r.reason.to_string()).collect::<Vec<_>>());
    pipeline.ingest(world.events[1..].to_vec())?;
    pipeline.bootstrap(now)?;
    for _ in 0..config.snapshot_retention + 1 {
        pipeline.run_job(JobKind::ContentShort, now)?;
    }
    drop(pipeline);

    // A restart replays the log and serves the last published versions.
    let pipeline = open()?;
    println!("reopened with {} events", pipeline.log().len());
    for kind in [ArtifactKind::Cohorts, ArtifactKind::ContentShort, ArtifactKind::ContentLong, ArtifactKind::Collab] {
        let m = pipeline.store().current_manifest(kind, ListingType::Buy).expect("published");
        let kept = pipeline.store().versions(kind, ListingType::Buy)?;
        println!("  {kind:<13} current {} digest {} (retained {kept:?})", m.version, &m.digest[..12]);
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
