use thiserror::Error;

use crate::model::{ElementId, NodeId};

/// Invalid structural model data.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("model dimension must be 2 or 3, got {0}")]
    BadDimension(usize),
    #[error("duplicate node id {0}")]
    DuplicateNode(NodeId),
    #[error("node {node} does not have {dim} coordinates and support flags")]
    NodeDimension { node: NodeId, dim: usize },
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("model has no supports")]
    NoSupport,
    #[error("duplicate element id {0}")]
    DuplicateElement(ElementId),
    #[error("element {element} references unknown node {node}")]
    UnknownNode { element: ElementId, node: NodeId },
    #[error("element {0} connects a node to itself")]
    DegenerateElement(ElementId),
    #[error("element {element}: {what} must be positive")]
    NonPositive {
        element: ElementId,
        what: &'static str,
    },
    #[error("element {0}: plane beams require a 2D model")]
    BeamInSpace(ElementId),
    #[error("element {0}: beam without second moment of area")]
    MissingInertia(ElementId),
    #[error("element {0} has zero length")]
    ZeroLength(ElementId),
    #[error("unknown element {0}")]
    UnknownElement(ElementId),
}

/// Errors raised by assembly, analysis and the update algorithms.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("model has no free degrees of freedom")]
    NoFreeDofs,
    #[error("element {element} has an all-zero compatibility row (no free DOF)")]
    ElementFullyConstrained { element: ElementId },
    #[error("system has no elements")]
    EmptySystem,
    #[error("structure is kinematically indeterminate: rank(A) = {rank} < n = {n}")]
    RankDeficient { rank: usize, n: usize },
    #[error("stiffness matrix is not positive definite (pivot {pivot}); structure is kinematically indeterminate")]
    NotPositiveDefinite { pivot: usize },
    #[error("update gate is singular (rcond = {rcond:e})")]
    GateSingular { rcond: f64 },
    #[error("element(s) {elements:?} form a statically determinate part and cannot be removed (gate rcond = {rcond:e})")]
    StaticallyDeterminateRemoval {
        elements: Vec<ElementId>,
        rcond: f64,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid row selection: {0}")]
    InvalidSelection(String),
    #[error("row {0} is not an element boundary")]
    InvalidInsertPosition(usize),
    #[error("unknown element {0}")]
    UnknownElement(ElementId),
    #[error("element {0} already exists")]
    DuplicateElement(ElementId),
    #[error("invalid element block: {0}")]
    InvalidBlock(String),
    #[error("operation needs a geometric model: {0}")]
    NeedsGeometry(String),
    #[error("benchmark correctness gate failed: {0}")]
    BenchGate(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
