//! Deterministic reconstruction of agent decision evidence from runtime traces.
//!
//! The library ingests per-regime trace files through vendor adapters,
//! normalizes them into fragment streams, reconstructs decision units,
//! classifies each decision-evidence property into a reconstructability
//! category, and emits feasibility reports, PROV-style provenance graphs,
//! and the cross-regime summary matrix under checksum verification.

pub mod adapters;
pub mod canon;
pub mod feasibility;
pub mod matrix;
pub mod model;
pub mod pipeline;
pub mod provenance;
pub mod repro;

pub use model::{
    score_of, Category, DecisionUnit, Fragment, FragmentKind, FragmentsFile, PropertyClass,
};

/// Version string stamped into feasibility reports and the origin manifest.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
