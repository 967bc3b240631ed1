//! Core data model for taxonomy induction: entities and single-rooted
//! taxonomies, the hierarchical numbering text format, and evaluation
//! metrics.

pub mod error;
pub mod fixtures;
pub mod metrics;
pub mod outline;
pub mod pool;
pub mod taxonomy;

pub use error::{MetricsError, OutlineError, TaxonomyError};
pub use metrics::{aggregate, aggregate_micro, evaluate, MetricsReport, Prf, SetCounts};
pub use outline::{
    outline_to_taxonomy, outline_to_taxonomy_lenient, parse_outline, parse_taxonomy,
    render_outline, Diagnostic, DiagnosticKind, Outline, OutlineLine,
};
pub use pool::EntityPool;
pub use taxonomy::{
    ancestor_closure, build_taxonomy, diff_edges, normalize_key, remove_edge_and_detach, Edge,
    Entity, Taxonomy,
};
