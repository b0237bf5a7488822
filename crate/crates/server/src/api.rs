//! HTTP routes. Field names on the wire match the core serde types.

use std::collections::{BTreeMap, HashMap};
use std::str::FromStr;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use proprec::domain::{ApartmentType, ListingType, SearchFilter, Timestamp, UserId, ValueRange};
use proprec::pipeline::Pipeline;
use proprec::response::ModelUsed;
use proprec::store::{ArtifactKind, Clock, JobKind, StoreError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tower_http::cors::CorsLayer;

use crate::jobs::{JobOrigin, JobQueue};

#[derive(Clone)]
pub struct AppState {
    pub pipeline: Arc<Pipeline>,
    pub clock: Arc<dyn Clock>,
    pub jobs: JobQueue,
    pub latency: Arc<LatencyStats>,
}

impl AppState {
    /// Starts the job worker, so this must run inside a tokio runtime.
    pub fn new(pipeline: Arc<Pipeline>, clock: Arc<dyn Clock>) -> Self {
        let jobs = JobQueue::start(pipeline.clone(), clock.clone());
        AppState { pipeline, clock, jobs, latency: Arc::default() }
    }
}

/// Running count and total of served latency, per model.
#[derive(Debug, Default)]
pub struct LatencyStats(Mutex<BTreeMap<ModelUsed, (u64, f64)>>);

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelLatency {
    pub count: u64,
    pub total_ms: f64,
    pub mean_ms: f64,
}

impl LatencyStats {
    pub fn record(&self, model: ModelUsed, ms: f64) {
        let mut m = self.0.lock().unwrap();
        let e = m.entry(model).or_default();
        e.0 += 1;
        e.1 += ms;
    }

    pub fn snapshot(&self) -> BTreeMap<String, ModelLatency> {
        let m = self.0.lock().unwrap();
        m.iter()
            .map(|(model, &(count, total_ms))| {
                (model.as_str().to_string(), ModelLatency { count, total_ms, mean_ms: total_ms / count as f64 })
            })
            .collect()
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/recommendations", get(recommendations))
        .route("/v1/events", post(events))
        .route("/v1/health", get(health))
        .route("/v1/admin/retrain", post(retrain))
        .route("/v1/admin/jobs", get(list_jobs))
        .route("/v1/admin/jobs/:id", get(job_status))
        .route("/v1/admin/latency", get(latency))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

fn bad_request(field: &str, message: impl Into<String>) -> Response {
    (StatusCode::BAD_REQUEST, Json(json!({ "error": message.into(), "field": field }))).into_response()
}

fn store_failure(e: StoreError) -> Response {
    let status = match e {
        StoreError::StorageFull => StatusCode::INSUFFICIENT_STORAGE,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    };
    (status, Json(json!({ "error": e.to_string() }))).into_response()
}

struct ParamError(&'static str, String);

fn required<'a>(q: &'a HashMap<String, String>, name: &'static str) -> Result<&'a str, ParamError> {
    q.get(name).map(String::as_str).filter(|v| !v.trim().is_empty()).ok_or(ParamError(name, format!("missing {name}")))
}

fn optional<T: FromStr>(q: &HashMap<String, String>, name: &'static str) -> Result<Option<T>, ParamError> {
    match q.get(name).filter(|v| !v.is_empty()) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| ParamError(name, format!("{name} is malformed: {v:?}"))),
    }
}

/// Turns recommendation query parameters into a user id and a validated filter.
pub fn parse_query(q: &HashMap<String, String>, default_k: usize) -> Result<(UserId, SearchFilter), (String, String)> {
    let parsed = (|| {
        let user = UserId::new(required(q, "user_id")?);
        let city = required(q, "city")?;
        let locality = required(q, "locality")?;
        let lt_raw = required(q, "listing_type")?;
        let lt = ListingType::from_str(lt_raw).map_err(|e| ParamError("listing_type", e.to_string()))?;
        let mut filter = SearchFilter::new(city, locality, lt).with_top_k(default_k);
        filter.apartment_type = optional::<ApartmentType>(q, "apartment_type")?;
        let (pmin, pmax) = (optional::<u64>(q, "price_min")?, optional::<u64>(q, "price_max")?);
        if pmin.is_some() || pmax.is_some() {
            filter.price = Some(ValueRange::new(pmin.unwrap_or(0), pmax.unwrap_or(u64::MAX)));
        }
        let (amin, amax) = (optional::<f64>(q, "area_min")?, optional::<f64>(q, "area_max")?);
        if amin.is_some() || amax.is_some() {
            filter.area = Some(ValueRange::new(amin.unwrap_or(0.0), amax.unwrap_or(f64::INFINITY)));
        }
        if let Some(k) = optional::<usize>(q, "top_k")? {
            filter.top_k = k;
        }
        Ok((user, filter))
    })();
    let (user, filter) = parsed.map_err(|ParamError(f, m)| (f.to_string(), m))?;
    filter.validate().map_err(|e| {
        let field = match &e {
            proprec::domain::DomainError::InvalidFilter(f) => f.to_string(),
            _ => "filter".to_string(),
        };
        (field, e.to_string())
    })?;
    Ok((user, filter))
}

async fn recommendations(State(s): State<AppState>, Query(q): Query<HashMap<String, String>>) -> Response {
    let started = Instant::now();
    let (user, filter) = match parse_query(&q, s.pipeline.config().default_k) {
        Ok(v) => v,
        Err((field, message)) => return bad_request(&field, message),
    };
    let mut response = s.pipeline.recommend(&user, &filter, s.clock.now());
    response.latency_ms = started.elapsed().as_secs_f64() * 1e3;
    s.latency.record(response.model_used, response.latency_ms);
    Json(response).into_response()
}

async fn events(State(s): State<AppState>, body: Bytes) -> Response {
    let batch = match serde_json::from_slice::<Value>(&body) {
        Ok(Value::Array(items)) => items,
        Ok(v @ Value::Object(_)) => vec![v],
        Ok(_) => return bad_request("body", "expected an event object or an array of events"),
        Err(e) => return bad_request("body", format!("body is not JSON: {e}")),
    };
    match s.pipeline.ingest_json(&batch) {
        Ok(report) => (
            StatusCode::ACCEPTED,
            Json(json!({
                "accepted": report.accepted,
                "rejected": report.rejected.len(),
                "rejections": report.rejected,
            })),
        )
            .into_response(),
        Err(e) => store_failure(e),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHealth {
    pub kind: ArtifactKind,
    pub listing_type: ListingType,
    pub version: String,
    pub built_at: Timestamp,
    pub age_ms: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub now: Timestamp,
    pub snapshots: Vec<SnapshotHealth>,
    /// Serving kinds with no published snapshot, as "kind/listing_type".
    pub missing: Vec<String>,
    pub events: usize,
    pub last_event_ts: Option<Timestamp>,
    pub event_log_lag_ms: Option<i64>,
}

/// Health report. Serving is unavailable without a cohort snapshot, since
/// that is the fallback every other route ends in.
pub fn health_report(pipeline: &Pipeline, now: Timestamp) -> (bool, Health) {
    let mut snapshots = Vec::new();
    let mut missing = Vec::new();
    let mut available = true;
    for kind in [ArtifactKind::Cohorts, ArtifactKind::ContentShort, ArtifactKind::ContentLong, ArtifactKind::Collab] {
        for lt in ListingType::ALL {
            match pipeline.store().current_manifest(kind, lt) {
                Some(m) => snapshots.push(SnapshotHealth {
                    kind,
                    listing_type: lt,
                    version: m.version,
                    built_at: m.built_at,
                    age_ms: now - m.built_at,
                }),
                None => {
                    available &= kind != ArtifactKind::Cohorts;
                    missing.push(format!("{kind}/{lt}"));
                }
            }
        }
    }
    let last = pipeline.log().span().map(|(_, hi)| hi);
    let health = Health {
        status: if available { "ok" } else { "unavailable" }.to_string(),
        now,
        snapshots,
        missing,
        events: pipeline.log().len(),
        last_event_ts: last,
        event_log_lag_ms: last.map(|t| now - t),
    };
    (available, health)
}

async fn health(State(s): State<AppState>) -> Response {
    let (ok, report) = health_report(&s.pipeline, s.clock.now());
    let status = if ok { StatusCode::OK } else { StatusCode::SERVICE_UNAVAILABLE };
    (status, Json(report)).into_response()
}

async fn retrain(State(s): State<AppState>, Query(q): Query<HashMap<String, String>>) -> Response {
    let Some(raw) = q.get("model") else { return bad_request("model", "missing model") };
    let model = match JobKind::from_str(raw) {
        Ok(m) => m,
        Err(e) => return bad_request("model", e),
    };
    let id = s.jobs.submit(model, JobOrigin::Manual);
    (StatusCode::ACCEPTED, Json(json!({ "job_id": id, "model": model }))).into_response()
}

async fn job_status(State(s): State<AppState>, Path(id): Path<u64>) -> Response {
    match s.jobs.status(id) {
        Some(status) => Json(status).into_response(),
        None => (StatusCode::NOT_FOUND, Json(json!({ "error": format!("no job {id}") }))).into_response(),
    }
}

async fn list_jobs(State(s): State<AppState>) -> Response {
    Json(s.jobs.all()).into_response()
}

async fn latency(State(s): State<AppState>) -> Response {
    Json(s.latency.snapshot()).into_response()
}
