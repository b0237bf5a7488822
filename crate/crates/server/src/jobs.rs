//! Single-worker retrain queue. Manual triggers and scheduler ticks both
//! enqueue here, so two retrains never run at the same time.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use proprec::domain::{ListingType, Timestamp};
use proprec::pipeline::Pipeline;
use proprec::store::{Clock, JobKind, Manifest, Scheduler};
use serde::Serialize;
use tokio::sync::{mpsc, watch};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    Running,
    Succeeded,
    Failed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum JobOrigin {
    Manual,
    Scheduled,
}

#[derive(Clone, Debug, Serialize)]
pub struct JobStatus {
    pub id: u64,
    pub model: JobKind,
    pub origin: JobOrigin,
    pub state: JobState,
    pub enqueued_at: Timestamp,
    pub started_at: Option<Timestamp>,
    pub finished_at: Option<Timestamp>,
    pub published: Vec<Manifest>,
    pub skipped: Vec<ListingType>,
    pub error: Option<String>,
}

struct Shared {
    jobs: Mutex<BTreeMap<u64, JobStatus>>,
    scheduler: Mutex<Scheduler>,
    pending: watch::Sender<usize>,
}

#[derive(Clone)]
pub struct JobQueue {
    tx: mpsc::UnboundedSender<u64>,
    shared: Arc<Shared>,
    next_id: Arc<AtomicU64>,
    clock: Arc<dyn Clock>,
}

impl JobQueue {
    /// Starts the worker on the current tokio runtime.
    pub fn start(pipeline: Arc<Pipeline>, clock: Arc<dyn Clock>) -> JobQueue {
        let (tx, rx) = mpsc::unbounded_channel();
        let shared = Arc::new(Shared {
            jobs: Mutex::new(BTreeMap::new()),
            scheduler: Mutex::new(Scheduler::new(pipeline.config().cadences.clone())),
            pending: watch::channel(0).0,
        });
        tokio::spawn(worker(rx, shared.clone(), pipeline, clock.clone()));
        JobQueue { tx, shared, next_id: Arc::new(AtomicU64::new(1)), clock }
    }

    pub fn submit(&self, model: JobKind, origin: JobOrigin) -> u64 {
        let id = self.next_id.fetch_add(1, Ordering::SeqCst);
        let status = JobStatus {
            id,
            model,
            origin,
            state: JobState::Queued,
            enqueued_at: self.clock.now(),
            started_at: None,
            finished_at: None,
            published: Vec::new(),
            skipped: Vec::new(),
            error: None,
        };
        self.shared.jobs.lock().unwrap().insert(id, status);
        self.shared.pending.send_modify(|n| *n += 1);
        // The worker lives as long as the runtime; a closed channel means shutdown.
        let _ = self.tx.send(id);
        id
    }

    /// Enqueues whatever the scheduler says is due now.
    pub fn tick(&self) -> Vec<u64> {
        let due = self.shared.scheduler.lock().unwrap().tick(self.clock.now());
        due.into_iter().map(|job| self.submit(job, JobOrigin::Scheduled)).collect()
    }

    pub fn status(&self, id: u64) -> Option<JobStatus> {
        self.shared.jobs.lock().unwrap().get(&id).cloned()
    }

    pub fn all(&self) -> Vec<JobStatus> {
        self.shared.jobs.lock().unwrap().values().cloned().collect()
    }

    pub fn pending(&self) -> usize {
        *self.shared.pending.borrow()
    }

    /// Resolves once every submitted job has finished.
    pub async fn wait_idle(&self) {
        let mut rx = self.shared.pending.subscribe();
        // The sender lives in `shared`, which we hold, so this cannot fail.
        let _ = rx.wait_for(|n| *n == 0).await;
    }
}

async fn worker(mut rx: mpsc::UnboundedReceiver<u64>, shared: Arc<Shared>, pipeline: Arc<Pipeline>, clock: Arc<dyn Clock>) {
    while let Some(id) = rx.recv().await {
        let now = clock.now();
        let (model, origin) = {
            let mut jobs = shared.jobs.lock().unwrap();
            let s = jobs.get_mut(&id).expect("submitted jobs are registered first");
            s.state = JobState::Running;
            s.started_at = Some(now);
            (s.model, s.origin)
        };
        let p = pipeline.clone();
        let result = tokio::task::spawn_blocking(move || p.run_job(model, now))
            .await
            .map_err(|e| e.to_string())
            .and_then(|r| r.map_err(|e| e.to_string()));
        {
            let mut jobs = shared.jobs.lock().unwrap();
            let s = jobs.get_mut(&id).expect("registered");
            s.finished_at = Some(clock.now());
            match &result {
                Ok(report) => {
                    s.state = JobState::Succeeded;
                    s.published = report.published.clone();
                    s.skipped = report.skipped.clone();
                }
                Err(e) => {
                    tracing::warn!(job = id, %model, error = %e, "retrain failed");
                    s.state = JobState::Failed;
                    s.error = Some(e.clone());
                }
            }
        }
        if origin == JobOrigin::Scheduled {
            let mut scheduler = shared.scheduler.lock().unwrap();
            match result {
                Ok(_) => scheduler.mark_success(model, now),
                Err(_) => scheduler.mark_failure(model),
            }
        }
        shared.pending.send_modify(|n| *n -= 1);
    }
}
