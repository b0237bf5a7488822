use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use proprec::collab::WeightingScheme;
use proprec::config::EngineConfig;
use proprec::datagen::{World, WorldParams};
use proprec::domain::{Catalog, InteractionEvent, Span, Timestamp};
use proprec::eval::{run_recency_experiment, run_weighting_experiment, RecencyParams, WeightingParams};
use proprec::pipeline::Pipeline;
use proprec::store::{read_jsonl, save_catalog, write_jsonl, Clock, JobKind, SystemClock};
use proprec_server::bench::{run_bench, stratified_mix, BenchParams};
use proprec_server::{open_pipeline, AppState, OffsetClock, CATALOG_FILE};

#[derive(Parser)]
#[command(name = "proprec", version, about = "Real-estate recommendation engine")]
struct Cli {
    /// Engine config (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic catalog and event log.
    Datagen {
        #[arg(long, default_value_t = 100_000)]
        properties: usize,
        #[arg(long, default_value_t = 200_000)]
        users: usize,
        #[arg(long, default_value_t = 7)]
        days: i64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Load data into a data directory.
    Ingest {
        #[command(subcommand)]
        what: IngestCommand,
    },
    /// Retrain one model and publish the snapshot.
    Train {
        model: TrainModel,
        /// `10m`-style span for a short-term content build, or `long`.
        #[arg(long)]
        horizon: Option<String>,
        #[arg(long)]
        scheme: Option<WeightingScheme>,
        #[arg(long)]
        rank: Option<usize>,
        #[arg(long)]
        data: PathBuf,
        /// `now`, `log-end` or epoch milliseconds.
        #[arg(long, default_value = "log-end")]
        at: String,
    },
    /// Offline experiments on a data directory's log.
    Eval {
        experiment: Experiment,
        #[arg(long)]
        data: PathBuf,
        /// Also write the CSV here.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        data: PathBuf,
        /// Serving clock start: `now`, `log-end` or epoch milliseconds.
        #[arg(long, default_value = "now")]
        at: String,
        /// How often the scheduler checks for due jobs.
        #[arg(long, default_value = "30s")]
        tick: Span,
    },
    /// Open-loop load test against a running server.
    Bench {
        #[arg(long, default_value_t = 1000)]
        rpm: u32,
        #[arg(long, default_value = "300s")]
        duration: Span,
        #[arg(long, default_value = "http://127.0.0.1:8080")]
        url: String,
        /// Data directory the query mix is drawn from.
        #[arg(long)]
        data: PathBuf,
        /// Instant the server's clock reads, used to classify users for the
        /// query mix: `now`, `log-end` or epoch milliseconds.
        #[arg(long, default_value = "log-end")]
        at: String,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum IngestCommand {
    /// Append a JSONL event file to the log.
    Replay {
        file: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 50_000)]
        batch: usize,
    },
    /// Install a JSONL catalog into the data directory.
    Catalog {
        file: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainModel {
    Cohorts,
    Content,
    ContentShort,
    ContentLong,
    Collab,
    /// Feature spaces plus every model.
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Recency,
    Weighting,
}

fn load_config(path: Option<&Path>) -> anyhow::Result<EngineConfig> {
    match path {
        Some(p) => EngineConfig::load(p).with_context(|| format!("loading {}", p.display())),
        None => Ok(EngineConfig::default()),
    }
}

fn resolve_at(at: &str, pipeline: &Pipeline) -> anyhow::Result<Timestamp> {
    match at {
        "now" => Ok(SystemClock.now()),
        "log-end" => Ok(pipeline.log().span().map(|(_, hi)| hi + 1).unwrap_or_else(|| SystemClock.now())),
        ms => ms.parse().with_context(|| format!("--at expects now, log-end or epoch ms, got {ms:?}")),
    }
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let mut config = load_config(cli.config.as_deref())?;

    match cli.command {
        Command::Datagen { properties, users, days, seed, out } => {
            fs::create_dir_all(&out)?;
            let world = World::generate(WorldParams::sized(properties, users, Span::days(days), seed));
            let catalog = Catalog::new(world.properties).context("generated catalog")?;
            save_catalog(&out.join(CATALOG_FILE), &catalog)?;
            let n = write_jsonl(&out.join("events.jsonl"), &world.events)?;
            println!("wrote {} properties and {n} events to {}", catalog.len(), out.display());
        }
        Command::Ingest { what: IngestCommand::Catalog { file, data } } => {
            let catalog = proprec::store::load_catalog(&file)?;
            fs::create_dir_all(&data)?;
            save_catalog(&data.join(CATALOG_FILE), &catalog)?;
            println!("installed {} properties", catalog.len());
        }
        Command::Ingest { what: IngestCommand::Replay { file, data, batch } } => {
            let pipeline = open_pipeline(&data, config)?;
            let events: Vec<InteractionEvent> = read_jsonl(&file)?;
            let (mut accepted, mut rejected) = (0, 0);
            for chunk in events.chunks(batch.max(1)) {
                let report = pipeline.ingest(chunk.to_vec())?;
                accepted += report.accepted;
                rejected += report.rejected.len();
                for r in report.rejected.iter().take(5) {
                    tracing::warn!(reason = %r.reason, detail = %r.detail, "rejected");
                }
            }
            println!("accepted {accepted}, rejected {rejected}");
        }
        Command::Train { model, horizon, scheme, rank, data, at } => {
            if let Some(s) = scheme {
                config.collab.scheme = s;
            }
            if let Some(r) = rank {
                config.collab.rank = r;
            }
            let job = match (model, horizon.as_deref()) {
                (TrainModel::Content, None | Some("long")) | (TrainModel::ContentLong, _) => Some(JobKind::ContentLong),
                (TrainModel::Content | TrainModel::ContentShort, Some(h)) => {
                    config.short_term_window = h.parse()?;
                    Some(JobKind::ContentShort)
                }
                (TrainModel::ContentShort, None) => Some(JobKind::ContentShort),
                (TrainModel::Collab, _) => Some(JobKind::Collab),
                (TrainModel::Cohorts, _) => Some(JobKind::Cohorts),
                (TrainModel::All, _) => None,
            };
            let pipeline = open_pipeline(&data, config)?;
            let now = resolve_at(&at, &pipeline)?;
            let reports = match job {
                Some(j) => vec![pipeline.run_job(j, now)?],
                None => pipeline.bootstrap(now)?,
            };
            for r in reports {
                for m in &r.published {
                    println!("{} {} {} built_at={} digest={}", m.kind, m.listing_type, m.version, m.built_at, m.digest);
                }
                for lt in &r.skipped {
                    println!("{} {lt} skipped (no training data)", r.job);
                }
            }
        }
        Command::Eval { experiment, data, csv, seed } => {
            let pipeline = open_pipeline(&data, config.clone())?;
            let events = pipeline.log().all_in_append_order();
            let report = match experiment {
                Experiment::Recency => {
                    let params = RecencyParams { bins: config.bins.clone(), ..Default::default() };
                    run_recency_experiment(&events, pipeline.catalog(), &params)?
                }
                Experiment::Weighting => {
                    let params = WeightingParams { collab: config.collab.clone(), seed, ..Default::default() };
                    run_weighting_experiment(&events, pipeline.catalog(), &params)?
                }
            };
            print!("{}", report.to_table());
            if let Some(path) = csv {
                fs::write(&path, report.to_csv())?;
            }
        }
        Command::Serve { port, data, at, tick } => {
            let pipeline = Arc::new(open_pipeline(&data, config)?);
            let clock: Arc<dyn Clock> = match at.as_str() {
                "now" => Arc::new(SystemClock),
                other => Arc::new(OffsetClock::starting_at(resolve_at(other, &pipeline)?)),
            };
            if !tick.is_positive() {
                bail!("--tick must be positive");
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let state = AppState::new(pipeline, clock);
                let addr = std::net::SocketAddr::from(([0, 0, 0, 0], port));
                proprec_server::serve(state, addr, Duration::from_millis(tick.as_millis() as u64)).await
            })?;
        }
        Command::Bench { rpm, duration, url, data, at, seed, out } => {
            let pipeline = open_pipeline(&data, config)?;
            let now = resolve_at(&at, &pipeline)?;
            let (queries, mix) = stratified_mix(&pipeline, now, 20_000, seed);
            eprintln!("query mix by category: {mix:?}");
            let params = BenchParams { base_url: url, rpm, duration: Duration::from_millis(duration.as_millis() as u64) };
            let rt = tokio::runtime::Runtime::new()?;
            let report = rt.block_on(run_bench(&params, &queries))?;
            let csv = report.to_csv();
            print!("{csv}");
            if report.errors > 0 {
                eprintln!("{} requests failed", report.errors);
            }
            if let Some(path) = out {
                fs::write(path, csv)?;
            }
        }
    }
    Ok(())
}
