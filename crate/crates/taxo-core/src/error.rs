use thiserror::Error;

use crate::taxonomy::{Edge, Entity};

fn join(entities: &[Entity]) -> String {
    entities
        .iter()
        .map(|e| format!("'{}'", e.surface()))
        .collect::<Vec<_>>()
        .join(", ")
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TaxonomyError {
    #[error("entity name is empty after normalization")]
    EmptyEntity,
    #[error("more than one top-level node: {}", join(.0))]
    MultipleRoots(Vec<Entity>),
    #[error("cycle detected through {}", join(.0))]
    CycleDetected(Vec<Entity>),
    #[error("'{0}' is not connected to the root")]
    DisconnectedNode(Entity),
    #[error("'{child}' has more than one parent: {}", join(.parents))]
    DuplicateParent { child: Entity, parents: Vec<Entity> },
    #[error("self edge on '{0}'")]
    SelfEdge(Entity),
    #[error("duplicate edge {0}")]
    DuplicateEdge(Edge),
    #[error("update drops {} existing edge(s)", .missing.len())]
    NonMonotoneUpdate { missing: Vec<Edge> },
    #[error("'{0}' still has children")]
    NotALeaf(Entity),
    #[error("edge {0} is not in the taxonomy")]
    MissingEdge(Edge),
    #[error("'{0}' is not in the taxonomy")]
    UnknownEntity(Entity),
    #[error("the root '{0}' cannot be removed")]
    CannotRemoveRoot(Entity),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OutlineError {
    #[error("input is empty")]
    EmptyInput,
    #[error("no line carries the root index 1")]
    NoRootLine,
    #[error("invalid outline: {0}")]
    Invalid(String),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("cannot aggregate an empty list of reports")]
    EmptyReportList,
}
