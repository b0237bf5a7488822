//! Open-loop load generator for `/v1/recommendations`.

use std::collections::{BTreeMap, HashMap};
use std::time::{Duration, Instant};

use proprec::domain::{ListingType, Property, Timestamp, UserCategory, UserId};
use proprec::orchestrator::classify_user;
use proprec::pipeline::Pipeline;
use proprec::response::RecommendationResponse;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BenchQuery {
    pub user_id: String,
    pub city: String,
    pub locality: String,
    pub listing_type: ListingType,
}

impl BenchQuery {
    pub fn path(&self) -> String {
        format!(
            "/v1/recommendations?user_id={}&city={}&locality={}&listing_type={}",
            encode(&self.user_id),
            encode(&self.city),
            encode(&self.locality),
            self.listing_type
        )
    }
}

fn encode(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for b in s.bytes() {
        match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => out.push(b as char),
            _ => out.push_str(&format!("%{b:02X}")),
        }
    }
    out
}

/// Queries drawn evenly across user categories as the router would classify
/// them at `now`. Known users search where they last browsed; cold-start
/// slots also include never-seen users searching a random listing's
/// locality. Short-term slots go to users the current short-term snapshot
/// profiles when there are any, since those are the users browsing right
/// now. Categories with no users give their share to the others.
pub fn stratified_mix(pipeline: &Pipeline, now: Timestamp, n: usize, seed: u64) -> (Vec<BenchQuery>, BTreeMap<UserCategory, usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let catalog = pipeline.catalog();
    let mut last: HashMap<UserId, &Property> = HashMap::new();
    let events = pipeline.log().all_in_append_order();
    for e in &events {
        if let Some(p) = catalog.get(&e.property_id) {
            last.insert(e.user_id.clone(), p);
        }
    }
    let models = ListingType::ALL.map(|lt| pipeline.models(lt));
    let mut pools: BTreeMap<UserCategory, Vec<(UserId, &Property)>> = BTreeMap::new();
    let mut recent: Vec<(UserId, &Property)> = Vec::new();
    let mut users: Vec<(&UserId, &&Property)> = last.iter().collect();
    users.sort_by(|a, b| a.0.cmp(b.0));
    for (user, &p) in users {
        let state = models[p.listing_type.index()].activity_state(user, pipeline.activity().summary(user));
        let category = classify_user(&state, now, pipeline.config());
        if category == UserCategory::ShortTerm && state.has_short_term_profile {
            recent.push((user.clone(), p));
        }
        pools.entry(category).or_default().push((user.clone(), p));
    }
    if !recent.is_empty() {
        pools.insert(UserCategory::ShortTerm, recent);
    }
    let listings: Vec<&Property> = catalog.iter().filter(|p| p.active).collect();
    if !listings.is_empty() {
        let cold = pools.entry(UserCategory::ColdStart).or_default();
        for i in 0..n.div_ceil(4) {
            let p = listings.choose(&mut rng).expect("non-empty");
            cold.push((UserId::new(format!("bench-new-{seed}-{i}")), p));
        }
    }
    let live: Vec<UserCategory> = UserCategory::ALL.into_iter().filter(|c| pools.get(c).is_some_and(|v| !v.is_empty())).collect();
    let mut counts = BTreeMap::new();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let Some(&category) = live.get(i % live.len().max(1)) else { break };
        let (user, p) = pools[&category].choose(&mut rng).expect("live pools are non-empty");
        out.push(BenchQuery {
            user_id: user.to_string(),
            city: p.city.clone(),
            locality: p.locality.clone(),
            listing_type: p.listing_type,
        });
        *counts.entry(category).or_insert(0) += 1;
    }
    out.shuffle(&mut rng);
    (out, counts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LatencySummary {
    pub requests: usize,
    pub mean_ms: f64,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub p99_ms: f64,
}

impl LatencySummary {
    pub fn of(mut samples: Vec<f64>) -> LatencySummary {
        samples.sort_by(f64::total_cmp);
        let n = samples.len();
        let pct = |p: f64| {
            if n == 0 {
                return f64::NAN;
            }
            let rank = ((p * n as f64).ceil() as usize).clamp(1, n);
            samples[rank - 1]
        };
        LatencySummary {
            requests: n,
            mean_ms: if n == 0 { f64::NAN } else { samples.iter().sum::<f64>() / n as f64 },
            p50_ms: pct(0.50),
            p95_ms: pct(0.95),
            p99_ms: pct(0.99),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub rpm: u32,
    pub duration_s: f64,
    pub errors: usize,
    /// Round trip measured by the client.
    pub client: LatencySummary,
    /// `latency_ms` reported by the server.
    pub server: LatencySummary,
    pub per_model: BTreeMap<String, LatencySummary>,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scope,requests,mean_ms,p50_ms,p95_ms,p99_ms\n");
        let mut row = |scope: &str, s: &LatencySummary| {
            out.push_str(&format!(
                "{scope},{},{:.3},{:.3},{:.3},{:.3}\n",
                s.requests, s.mean_ms, s.p50_ms, s.p95_ms, s.p99_ms
            ));
        };
        row("client", &self.client);
        row("server", &self.server);
        for (model, s) in &self.per_model {
            row(&format!("model:{model}"), s);
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct BenchParams {
    pub base_url: String,
    pub rpm: u32,
    pub duration: Duration,
}

struct Sample {
    client_ms: f64,
    server: Option<RecommendationResponse>,
}

/// Fires requests at a fixed rate regardless of how fast responses come back,
/// cycling through `queries`.
pub async fn run_bench(params: &BenchParams, queries: &[BenchQuery]) -> anyhow::Result<BenchReport> {
    anyhow::ensure!(!queries.is_empty(), "no queries to send");
    anyhow::ensure!(params.rpm > 0, "rpm must be positive");
    let client = reqwest::Client::builder().pool_max_idle_per_host(64).build()?;
    let period = Duration::from_secs_f64(60.0 / params.rpm as f64);
    let total = (params.duration.as_secs_f64() / period.as_secs_f64()).round() as usize;
    let mut ticker = tokio::time::interval(period);
    let mut tasks = Vec::with_capacity(total);
    let started = Instant::now();
    for i in 0..total {
        ticker.tick().await;
        let url = format!("{}{}", params.base_url.trim_end_matches('/'), queries[i % queries.len()].path());
        let client = client.clone();
        tasks.push(tokio::spawn(async move {
            let t = Instant::now();
            let server = match client.get(&url).send().await {
                Ok(r) if r.status().is_success() => r.json::<RecommendationResponse>().await.ok(),
                _ => None,
            };
            Sample { client_ms: t.elapsed().as_secs_f64() * 1e3, server }
        }));
    }
    let mut client_ms = Vec::with_capacity(total);
    let mut server_ms = Vec::with_capacity(total);
    let mut by_model: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut errors = 0;
    for t in tasks {
        let s = t.await?;
        match s.server {
            Some(r) => {
                client_ms.push(s.client_ms);
                server_ms.push(r.latency_ms);
                by_model.entry(r.model_used.as_str().to_string()).or_default().push(r.latency_ms);
            }
            None => errors += 1,
        }
    }
    Ok(BenchReport {
        rpm: params.rpm,
        duration_s: started.elapsed().as_secs_f64(),
        errors,
        client: LatencySummary::of(client_ms),
        server: LatencySummary::of(server_ms),
        per_model: by_model.into_iter().map(|(k, v)| (k, LatencySummary::of(v))).collect(),
    })
}
