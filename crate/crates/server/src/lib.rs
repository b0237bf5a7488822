//! HTTP serving layer for proprec, plus the retrain queue and an open-loop
//! load generator.
//!
//! ```no_run
//! # async fn run() -> anyhow::Result<()> {
//! use std::sync::Arc;
//! use proprec::config::EngineConfig;
//! use proprec::store::SystemClock;
//!
//! let pipeline = Arc::new(proprec_server::open_pipeline("data".as_ref(), EngineConfig::default())?);
//! let state = proprec_server::AppState::new(pipeline, Arc::new(SystemClock));
//! proprec_server::serve(state, "127.0.0.1:8080".parse()?, std::time::Duration::from_secs(30)).await
//! # }
//! ```

pub mod api;
pub mod bench;
pub mod clock;
pub mod jobs;

use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use proprec::config::EngineConfig;
use proprec::pipeline::Pipeline;
use proprec::store::{load_catalog, EventLog, SnapshotStore, StoreError};

pub use api::{router, AppState};
pub use clock::OffsetClock;
pub use jobs::{JobOrigin, JobQueue, JobState, JobStatus};

pub const CATALOG_FILE: &str = "catalog.jsonl";
pub const LOG_DIR: &str = "log";
pub const SNAPSHOT_DIR: &str = "snapshots";

/// Opens a data directory laid out as `catalog.jsonl`, `log/` and `snapshots/`.
pub fn open_pipeline(data: &Path, config: EngineConfig) -> Result<Pipeline, StoreError> {
    let catalog = load_catalog(&data.join(CATALOG_FILE))?;
    let log = EventLog::open(data.join(LOG_DIR))?;
    let store = SnapshotStore::open(data.join(SNAPSHOT_DIR), config.snapshot_retention)?;
    Ok(Pipeline::new(Arc::new(catalog), Arc::new(log), Arc::new(store), config))
}

/// Polls the scheduler every `every` and enqueues due jobs.
pub fn spawn_scheduler(jobs: JobQueue, every: Duration) -> tokio::task::JoinHandle<()> {
    tokio::spawn(async move {
        let mut ticker = tokio::time::interval(every);
        loop {
            ticker.tick().await;
            jobs.tick();
        }
    })
}

/// Binds `addr` and serves until ctrl-c, with the scheduler running.
pub async fn serve(state: AppState, addr: SocketAddr, tick: Duration) -> anyhow::Result<()> {
    let scheduler = spawn_scheduler(state.jobs.clone(), tick);
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "serving");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    scheduler.abort();
    Ok(())
}

/// Serves on an already-bound listener in the background. Used by tests and
/// the load harness.
pub async fn spawn_server(state: AppState) -> std::io::Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await?;
    let addr = listener.local_addr()?;
    let handle = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, router(state)).await {
            tracing::error!(error = %e, "server stopped");
        }
    });
    Ok((addr, handle))
}
