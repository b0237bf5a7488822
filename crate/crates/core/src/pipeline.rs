//! Wires the catalog, event log, activity index and snapshot store into the
//! ingest, retrain and serve paths shared by the HTTP server and the CLI.

use std::collections::BTreeMap;
use std::sync::Arc;

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::cohort::{build_cohorts, score_cohorts, CohortSnapshot};
use crate::collab::{train_collab, CollabError, FactorModel};
use crate::config::EngineConfig;
use crate::content::{build_content_snapshot, ContentSnapshot, ContentTraining, Horizon};
use crate::domain::{
    validate_event, Catalog, EventRejection, InteractionEvent, ListingType, Property, SearchFilter, Timestamp, UserId,
};
use crate::features::FeatureSpace;
use crate::orchestrator::{recommend, run_model, ModelSet, RequestContext};
use crate::response::RecommendationResponse;
use crate::store::{
    ActivityIndex, ArtifactKind, EventLog, JobKind, Manifest, PublishedSpace, Scheduler, Slotted,
    SnapshotStore, StoreError, Versioned,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("{listing_type} collaborative training: {source}")]
    Collab { listing_type: ListingType, source: CollabError },
}

/// Parses one wire event, resolving action aliases through the config.
pub fn parse_event(value: &Value, config: &EngineConfig) -> Result<InteractionEvent, EventRejection> {
    let obj = value.as_object().ok_or_else(|| EventRejection::MalformedEvent("expected a JSON object".into()))?;
    let field = |name: &str| obj.get(name).ok_or_else(|| EventRejection::MalformedEvent(format!("missing field {name}")));
    let string = |name: &str| -> Result<String, EventRejection> {
        field(name)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| EventRejection::MalformedEvent(format!("{name} must be a string")))
    };
    let ts = field("ts")?;
    let timestamp = ts.as_i64().filter(|t| *t >= 0).ok_or_else(|| EventRejection::MalformedTimestamp(ts.to_string()))?;
    let raw_action = string("action")?;
    let action = config.resolve_action(&raw_action).ok_or(EventRejection::UnknownAction(raw_action))?;
    let listing_type: ListingType = string("listing_type")?.parse().map_err(|e: crate::domain::DomainError| {
        EventRejection::MalformedEvent(e.to_string())
    })?;
    Ok(InteractionEvent {
        timestamp,
        user_id: UserId::new(string("user_id")?),
        property_id: string("property_id")?.into(),
        action,
        listing_type,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedEvent {
    pub index: usize,
    pub reason: String,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub accepted: usize,
    pub rejected: Vec<RejectedEvent>,
}

impl IngestReport {
    fn reject(&mut self, index: usize, e: &EventRejection) {
        self.rejected.push(RejectedEvent { index, reason: e.code().to_string(), detail: e.to_string() });
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JobReport {
    pub job: JobKind,
    pub ran_at: Timestamp,
    pub published: Vec<Manifest>,
    /// Listing types that had nothing to train on.
    pub skipped: Vec<ListingType>,
}

/// Outcome of one scheduled job inside [`Pipeline::run_due`].
#[derive(Debug)]
pub struct JobRun {
    pub job: JobKind,
    pub result: Result<JobReport, PipelineError>,
}

/// Result of replaying a served response against the versions it reported.
#[derive(Clone, Debug, PartialEq)]
pub struct AuditOutcome {
    pub matches: bool,
    pub recomputed: Vec<crate::response::ScoredItem>,
}

pub struct Pipeline {
    catalog: Arc<Catalog>,
    log: Arc<EventLog>,
    store: Arc<SnapshotStore>,
    activity: ActivityIndex,
    config: EngineConfig,
    spaces: [FeatureSpace; 2],
    /// Featurized catalog per listing type, reused by content retrains.
    content_base: [ContentSnapshot; 2],
    ingest_lock: Mutex<()>,
}

impl Pipeline {
    /// Builds the pipeline and replays the existing log into the activity index.
    pub fn new(catalog: Arc<Catalog>, log: Arc<EventLog>, store: Arc<SnapshotStore>, config: EngineConfig) -> Self {
        let activity = ActivityIndex::new(config.inactivity_reset.as_millis());
        activity.record_all(&log.all_in_append_order());
        let spaces = ListingType::ALL.map(|lt| FeatureSpace::new(lt, config.bins.clone()));
        let content_base = ListingType::ALL.map(|lt| {
            let props: Vec<&Property> = catalog.active(lt).collect();
            let space = &spaces[lt.index()];
            let params = ContentTraining {
                horizon: Horizon::ShortTerm,
                window: (0, 0),
                built_at: 0,
                space,
                min_distinct_properties: 0,
            };
            build_content_snapshot(&[], &props, &params)
        });
        Pipeline { catalog, log, store, activity, config, spaces, content_base, ingest_lock: Mutex::new(()) }
    }

    /// In-memory log and store, for tests and examples.
    pub fn in_memory(catalog: Catalog, config: EngineConfig) -> Self {
        Pipeline::new(Arc::new(catalog), Arc::new(EventLog::in_memory()), Arc::new(SnapshotStore::in_memory()), config)
    }

    pub fn catalog(&self) -> &Catalog {
        &self.catalog
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub fn store(&self) -> &SnapshotStore {
        &self.store
    }

    pub fn activity(&self) -> &ActivityIndex {
        &self.activity
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Validates, appends and indexes a batch. Rejected events are reported,
    /// never stored.
    pub fn ingest(&self, events: Vec<InteractionEvent>) -> Result<IngestReport, StoreError> {
        self.ingest_parsed(events.into_iter().map(Ok).collect())
    }

    /// Same as [`Pipeline::ingest`] for raw wire events.
    pub fn ingest_json(&self, values: &[Value]) -> Result<IngestReport, StoreError> {
        self.ingest_parsed(values.iter().map(|v| parse_event(v, &self.config)).collect())
    }

    fn ingest_parsed(&self, parsed: Vec<Result<InteractionEvent, EventRejection>>) -> Result<IngestReport, StoreError> {
        let _guard = self.ingest_lock.lock();
        let mut report = IngestReport::default();
        let mut accepted = Vec::with_capacity(parsed.len());
        for (index, item) in parsed.into_iter().enumerate() {
            let checked = item.and_then(|e| {
                validate_event(&e, &self.catalog)?;
                self.activity.check_order(&e)?;
                Ok(e)
            });
            match checked {
                Ok(e) => {
                    self.activity.record(&e);
                    accepted.push(e);
                }
                Err(e) => report.reject(index, &e),
            }
        }
        self.log.append_batch(&accepted)?;
        report.accepted = accepted.len();
        Ok(report)
    }

    /// Snapshots currently serving one listing type.
    pub fn models(&self, listing_type: ListingType) -> ModelSet {
        ModelSet {
            cohorts: self.store.current(ArtifactKind::Cohorts, listing_type),
            content_short: self.store.current(ArtifactKind::ContentShort, listing_type),
            content_long: self.store.current(ArtifactKind::ContentLong, listing_type),
            collab: self.store.current(ArtifactKind::Collab, listing_type),
        }
    }

    pub fn recommend(&self, user_id: &UserId, filter: &SearchFilter, now: Timestamp) -> RecommendationResponse {
        let models = self.models(filter.listing_type);
        let ctx = RequestContext { user_id, filter, now, catalog: &self.catalog, config: &self.config };
        recommend(&ctx, &models, self.activity.summary(user_id))
    }

    /// Publishes the feature spaces, then runs every job once.
    pub fn bootstrap(&self, now: Timestamp) -> Result<Vec<JobReport>, PipelineError> {
        for space in &self.spaces {
            self.store.publish(PublishedSpace { space: space.clone(), built_at: now })?;
        }
        JobKind::ALL.into_iter().map(|job| self.run_job(job, now)).collect()
    }

    /// Runs every job the scheduler says is due and records the outcome.
    pub fn run_due(&self, scheduler: &mut Scheduler, now: Timestamp) -> Vec<JobRun> {
        let mut runs = Vec::new();
        for job in scheduler.tick(now) {
            let result = self.run_job(job, now);
            match &result {
                Ok(_) => scheduler.mark_success(job, now),
                Err(e) => {
                    tracing::warn!(%job, error = %e, "retrain failed, keeping previous snapshot");
                    scheduler.mark_failure(job);
                }
            }
            runs.push(JobRun { job, result });
        }
        runs
    }

    /// Retrains one artifact kind for both listing types and publishes it.
    pub fn run_job(&self, job: JobKind, now: Timestamp) -> Result<JobReport, PipelineError> {
        let mut report = JobReport { job, ran_at: now, published: Vec::new(), skipped: Vec::new() };
        for lt in ListingType::ALL {
            let manifest = match job {
                JobKind::ContentShort => {
                    let window = (now - self.config.short_term_window.as_millis(), now);
                    Some(self.publish(self.content(lt, Horizon::ShortTerm, window, now))?)
                }
                JobKind::ContentLong => {
                    let window = (now - self.config.training_window(lt).as_millis(), now);
                    Some(self.publish(self.content(lt, Horizon::LongTerm, window, now))?)
                }
                JobKind::Collab => {
                    let window = (now - self.config.training_window(lt).as_millis(), now);
                    let events = self.log.read_window(window.0, window.1, lt);
                    match train_collab(&events, lt, window, &self.config.collab) {
                        Ok(model) => Some(self.publish::<FactorModel>(model)?),
                        Err(CollabError::EmptyMatrix) => None,
                        Err(source) => return Err(PipelineError::Collab { listing_type: lt, source }),
                    }
                }
                JobKind::Cohorts => {
                    let window = (now - self.config.training_window(lt).as_millis(), now);
                    let events = self.log.read_window(window.0, window.1, lt);
                    let scored = score_cohorts(build_cohorts(self.catalog.active(lt), &events, &self.config.bins));
                    let snap = CohortSnapshot::new(lt, now, window, self.config.bins.clone(), scored);
                    Some(self.publish(snap)?)
                }
            };
            match manifest {
                Some(m) => report.published.push(m),
                None => report.skipped.push(lt),
            }
        }
        tracing::info!(%job, published = report.published.len(), skipped = report.skipped.len(), "job finished");
        Ok(report)
    }

    fn content(&self, lt: ListingType, horizon: Horizon, window: (Timestamp, Timestamp), now: Timestamp) -> ContentSnapshot {
        let events = self.log.read_window(window.0, window.1, lt);
        let min_distinct_properties = match horizon {
            Horizon::ShortTerm => 0,
            Horizon::LongTerm => self.config.min_properties_long_term,
        };
        let params =
            ContentTraining { horizon, window, built_at: now, space: &self.spaces[lt.index()], min_distinct_properties };
        self.content_base[lt.index()].retrained(&events, &params)
    }

    fn publish<T: Slotted>(&self, artifact: T) -> Result<Manifest, StoreError> {
        Ok(self.store.publish(artifact)?.manifest.clone())
    }

    fn pinned<T: Slotted>(&self, kind: ArtifactKind, lt: ListingType, version: Option<&String>) -> Result<Option<Arc<Versioned<T>>>, StoreError> {
        let Some(version) = version else { return Ok(None) };
        if let Some(cur) = self.store.current::<T>(kind, lt).filter(|c| &c.version == version) {
            return Ok(Some(cur));
        }
        self.store.load_version::<T>(kind, lt, version).map(Some)
    }

    /// Reloads the snapshot versions a response reported, reruns the model it
    /// says served, and compares item lists.
    pub fn audit(&self, response: &RecommendationResponse, filter: &SearchFilter) -> Result<AuditOutcome, StoreError> {
        let lt = filter.listing_type;
        let v: &BTreeMap<String, String> = &response.snapshots;
        let get = |k: ArtifactKind| v.get(k.as_str());
        let models = ModelSet {
            cohorts: self.pinned(ArtifactKind::Cohorts, lt, get(ArtifactKind::Cohorts))?,
            content_short: self.pinned(ArtifactKind::ContentShort, lt, get(ArtifactKind::ContentShort))?,
            content_long: self.pinned(ArtifactKind::ContentLong, lt, get(ArtifactKind::ContentLong))?,
            collab: self.pinned(ArtifactKind::Collab, lt, get(ArtifactKind::Collab))?,
        };
        let ctx = RequestContext {
            user_id: &response.user_id,
            filter,
            now: response.served_at,
            catalog: &self.catalog,
            config: &self.config,
        };
        let recomputed = if response.items.is_empty() {
            Vec::new()
        } else {
            run_model(response.model_used, &models, &ctx).unwrap_or_default()
        };
        Ok(AuditOutcome { matches: recomputed == response.items, recomputed })
    }
}
