//! Crime-aware patrol route planning for multiple police officers.
//!
//! The crate covers the full pipeline: ingesting (or synthesizing) crime,
//! check-in, POI and emergency-call records; extracting per-cell features;
//! predicting short-interval crime hotspots with a random forest; encoding
//! multi-officer plans as keyed link-lists (LERK and its guided variant
//! G-LERK); optimizing them with a genetic algorithm, cuckoo search or
//! greedy dispatch; simulating minute-resolution patrol days; and scoring
//! the outcome with efficiency and robustness metrics.
//!
//! Population fitness evaluation and benchmark sweeps run on rayon when the
//! default `parallel` feature is enabled; disabling it falls back to
//! sequential execution with identical results.

pub mod domain;
pub mod encoding;
pub mod eval;
pub mod exec;
pub mod features;
pub mod ingest;
pub mod optimize;
pub mod predict;
pub mod sim;
pub mod sweep;

pub use domain::{GridMap, LatLon, NodeId, NodeState, OfficerId, PatrolNode};
pub use encoding::{Chromosome, PlanContext, RoutePlan};
pub use eval::MetricReport;
pub use ingest::Scenario;
pub use optimize::{OptimizerParams, Planner};
pub use predict::HotspotMap;
pub use sim::{EventLog, SimConfig};
