//! Left-shift failure-mode analysis for human-autonomy teams.
//!
//! The pipeline reads an OODA² activity model, extracts the edges where a human and
//! a machine lane exchange information, lays failure-mode lenses over each of them,
//! folds in the analyst's specialised failure modes, and traces each mode up and
//! down the activity graph to see where design patterns amplify or damp it.

pub mod cli;
pub mod dsl;
pub mod fixtures;
pub mod interactions;
pub mod lenses;
pub mod mapping;
pub mod mitigations;
pub mod model;
pub mod pipeline;
pub mod report;
pub mod tracing;

pub use interactions::{extract_interactions, interaction_by_id, Direction, Interaction};
pub use lenses::{applicable_modes, builtin_catalog, merge_catalogs, LensCatalog};
pub use mapping::{
    apply_specialisations, map_failure_modes, FailureModeTable, SpecialisedFailureMode,
};
pub use mitigations::{builtin_mitigations, suggest_mitigations, Mitigation};
pub use model::{node_lookup, validate, validate_with, Ooda2Model, Strictness};
pub use tracing::{derive_second_order, trace, Classification, TraceDirection, TracePathway};
