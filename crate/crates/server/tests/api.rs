use std::sync::Arc;
use std::time::Duration;

use proprec::config::EngineConfig;
use proprec::datagen::{World, WorldParams};
use proprec::domain::{Catalog, Span};
use proprec::pipeline::Pipeline;
use proprec::store::{Clock, SimulatedClock};
use proprec_server::{spawn_server, AppState};
use serde_json::{json, Value};

struct Harness {
    base: String,
    http: reqwest::Client,
    clock: Arc<SimulatedClock>,
    world: World,
    state: AppState,
}

async fn harness(bootstrap: bool) -> Harness {
    let mut p = WorldParams::sized(1_500, 300, Span::hours(3), 11);
    p.sessions.sessions_per_day = 40.0;
    let world = World::generate(p);
    let catalog = Catalog::new(world.properties.clone()).unwrap();
    let pipeline = Pipeline::in_memory(catalog, EngineConfig::default());
    pipeline.ingest(world.events.clone()).unwrap();
    let clock = Arc::new(SimulatedClock::new(world.end()));
    if bootstrap {
        pipeline.bootstrap(clock.now()).unwrap();
    }
    let state = AppState::new(Arc::new(pipeline), clock.clone());
    let (addr, _) = spawn_server(state.clone()).await.unwrap();
    Harness { base: format!("http://{addr}"), http: reqwest::Client::new(), clock, world, state }
}

impl Harness {
    async fn get(&self, path: &str) -> (u16, Value) {
        let r = self.http.get(format!("{}{path}", self.base)).send().await.unwrap();
        (r.status().as_u16(), r.json().await.unwrap())
    }

    async fn post(&self, path: &str, body: impl Into<reqwest::Body>) -> (u16, Value) {
        let r = self.http.post(format!("{}{path}", self.base)).body(body).send().await.unwrap();
        (r.status().as_u16(), r.json().await.unwrap())
    }

    fn locality(&self) -> (&str, &str, &str) {
        let p = &self.world.properties[0];
        (&p.city, &p.locality, p.listing_type.as_str())
    }

    async fn wait_job(&self, id: u64) -> Value {
        for _ in 0..600 {
            let (code, body) = self.get(&format!("/v1/admin/jobs/{id}")).await;
            assert_eq!(code, 200);
            if matches!(body["state"].as_str(), Some("succeeded" | "failed")) {
                return body;
            }
            tokio::time::sleep(Duration::from_millis(50)).await;
        }
        panic!("job {id} did not finish");
    }
}

#[tokio::test]
async fn new_user_gets_cold_start() {
    let h = harness(true).await;
    let (city, loc, lt) = h.locality();
    let (code, body) = h.get(&format!("/v1/recommendations?user_id=nobody&city={city}&locality={}&listing_type={lt}", loc.replace(' ', "%20"))).await;
    assert_eq!(code, 200, "{body}");
    assert_eq!(body["model_used"], "cold_start");
    assert_eq!(body["category"], "cold_start");
    let items = body["items"].as_array().unwrap();
    assert!(!items.is_empty() && items.len() <= 6);
    assert!(body["latency_ms"].as_f64().unwrap() >= 0.0);
}

#[tokio::test]
async fn missing_or_malformed_params_name_the_field() {
    let h = harness(true).await;
    let (code, body) = h.get("/v1/recommendations?user_id=u&city=Pune&listing_type=buy").await;
    assert_eq!((code, body["field"].as_str()), (400, Some("locality")));
    let (code, body) = h.get("/v1/recommendations?user_id=u&city=Pune&locality=x&listing_type=lease").await;
    assert_eq!((code, body["field"].as_str()), (400, Some("listing_type")));
    let (code, body) = h.get("/v1/recommendations?user_id=u&city=Pune&locality=x&listing_type=buy&price_min=abc").await;
    assert_eq!((code, body["field"].as_str()), (400, Some("price_min")));
    let (code, body) = h.get("/v1/recommendations?user_id=u&city=Pune&locality=x&listing_type=buy&top_k=0").await;
    assert_eq!((code, body["field"].as_str()), (400, Some("top_k")));
}

#[tokio::test]
async fn unknown_locality_is_empty_with_reason_not_an_error() {
    let h = harness(true).await;
    let (code, body) = h.get("/v1/recommendations?user_id=u&city=Nowhere&locality=Nowhere&listing_type=rent").await;
    assert_eq!(code, 200);
    assert!(body["items"].as_array().unwrap().is_empty());
    assert!(body["reason"].is_string());
}

#[tokio::test]
async fn events_accept_single_batch_and_empty() {
    let h = harness(true).await;
    let p = &h.world.properties[0];
    let ts = h.clock.now();
    let ev = |pid: &str, user: &str| {
        json!({"ts": ts, "user_id": user, "property_id": pid, "action": "detail_page_engagement", "listing_type": p.listing_type})
    };
    let (code, body) = h.post("/v1/events", ev(p.id.as_str(), "api-a").to_string()).await;
    assert_eq!((code, body["accepted"].as_u64()), (202, Some(1)));

    let batch = json!([ev(p.id.as_str(), "api-b"), ev("no-such-listing", "api-b"), ev(p.id.as_str(), "api-c")]);
    let (code, body) = h.post("/v1/events", batch.to_string()).await;
    assert_eq!(code, 202);
    assert_eq!((body["accepted"].as_u64(), body["rejected"].as_u64()), (Some(2), Some(1)));
    assert_eq!(body["rejections"][0]["reason"], "UnknownProperty");
    assert_eq!(body["rejections"][0]["index"], 1);

    let (code, body) = h.post("/v1/events", "[]").await;
    assert_eq!((code, body["accepted"].as_u64()), (202, Some(0)));
    let (code, _) = h.post("/v1/events", "{not json").await;
    assert_eq!(code, 400);
}

#[tokio::test]
async fn health_is_503_until_cohorts_exist() {
    let h = harness(false).await;
    let (code, body) = h.get("/v1/health").await;
    assert_eq!(code, 503);
    assert_eq!(body["status"], "unavailable");

    let id = h.post("/v1/admin/retrain?model=cohorts", "").await.1["job_id"].as_u64().unwrap();
    assert_eq!(h.wait_job(id).await["state"], "succeeded");
    let (code, body) = h.get("/v1/health").await;
    assert_eq!(code, 200, "{body}");
    assert!(body["event_log_lag_ms"].as_i64().unwrap() >= 0);
}

#[tokio::test]
async fn retrain_publishes_new_version_and_resets_age() {
    let h = harness(true).await;
    let collab_age = |body: &Value| -> (String, i64) {
        let s = body["snapshots"].as_array().unwrap().iter().find(|s| s["kind"] == "collab").unwrap().clone();
        (s["version"].as_str().unwrap().to_string(), s["age_ms"].as_i64().unwrap())
    };
    h.clock.advance(Span::hours(1));
    let (v0, age0) = collab_age(&h.get("/v1/health").await.1);
    assert_eq!(age0, 3_600_000);

    let (code, body) = h.post("/v1/admin/retrain?model=collab", "").await;
    assert_eq!(code, 202);
    let done = h.wait_job(body["job_id"].as_u64().unwrap()).await;
    assert_eq!(done["state"], "succeeded", "{done}");
    let (v1, age1) = collab_age(&h.get("/v1/health").await.1);
    assert_ne!(v0, v1);
    assert_eq!(age1, 0);

    let (code, body) = h.post("/v1/admin/retrain?model=everything", "").await;
    assert_eq!((code, body["field"].as_str()), (400, Some("model")));
    assert_eq!(h.get("/v1/admin/jobs/999").await.0, 404);
}

#[tokio::test]
async fn double_trigger_runs_one_after_the_other() {
    let h = harness(true).await;
    let a = h.post("/v1/admin/retrain?model=collab", "").await.1["job_id"].as_u64().unwrap();
    let b = h.post("/v1/admin/retrain?model=collab", "").await.1["job_id"].as_u64().unwrap();
    use proprec_server::JobState::{Queued, Running, Succeeded};
    while h.state.jobs.pending() > 0 {
        let (sa, sb) = (h.state.jobs.status(a).unwrap().state, h.state.jobs.status(b).unwrap().state);
        assert!(!(sa == Running && sb == Running), "two retrains ran at once");
        if sb == Running {
            assert_eq!(sa, Succeeded);
        }
        if sa == Running {
            assert_eq!(sb, Queued);
        }
        tokio::time::sleep(Duration::from_millis(2)).await;
    }
    let (a, b) = (h.state.jobs.status(a).unwrap(), h.state.jobs.status(b).unwrap());
    assert_eq!((a.state, b.state), (Succeeded, Succeeded));
    let manifests: Vec<_> = [&a, &b].iter().map(|s| s.published[0].version.clone()).collect();
    assert_ne!(manifests[0], manifests[1]);
}
