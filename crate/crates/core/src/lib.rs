//! Property recommendations routed by how much we know about the user.
//!
//! A request is classified from the user's activity ([`orchestrator::classify_user`])
//! and served by one of four models, falling back along a fixed chain:
//!
//! - [`cohort`]: popular listing cohorts for users with no usable history
//! - [`content`]: cosine similarity against a short- or long-term feature profile
//! - [`collab`]: ALS factors over a weighted interaction matrix
//! - hybrid: short-term content blended with the long-term model
//!
//! [`pipeline::Pipeline`] ties the event log, snapshot store and retrains
//! together. [`datagen`] builds synthetic worlds and [`eval`] runs the offline
//! experiments.
//!
//! ```
//! use proprec::config::EngineConfig;
//! use proprec::datagen::{World, WorldParams};
//! use proprec::domain::{Catalog, SearchFilter, Span};
//! use proprec::pipeline::Pipeline;
//!
//! let world = World::generate(WorldParams::sized(500, 100, Span::hours(1), 1));
//! let pipeline = Pipeline::in_memory(Catalog::new(world.properties.clone()).unwrap(), EngineConfig::default());
//! pipeline.ingest(world.events.clone()).unwrap();
//! pipeline.bootstrap(world.end()).unwrap();
//!
//! let p = &world.properties[0];
//! let filter = SearchFilter::new(&p.city, &p.locality, p.listing_type);
//! let response = pipeline.recommend(&"someone-new".into(), &filter, world.end());
//! assert_eq!(response.model_used.as_str(), "cold_start");
//! ```
//!
//! Examples: `synthetic_world`, `cold_start`, `content_filtering`,
//! `collaborative_als`, `hybrid_routing`, `offline_evaluation`,
//! `ingest_and_snapshots`.

pub mod cohort;
pub mod collab;
pub mod config;
pub mod content;
pub mod datagen;
pub mod domain;
pub mod eval;
pub mod features;
pub mod orchestrator;
pub mod pipeline;
pub mod response;
pub mod store;
