//! Redundancy matrices of truss and plane-frame structures, with
//! low-rank updates for adding, removing and exchanging elements.

// `!(x > 0)` style guards also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod bench;
pub mod design;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod linalg;
pub mod model;
pub mod redundancy;
mod scalar;
pub mod updates;

pub use assembly::{
    assemble_system, build_dof_map, check_kinematic_determinacy, DofMap, ElementBlock, ElementRows,
    RowMap, SystemMatrices,
};
pub use design::DesignState;
pub use error::{Error, ModelError, Result};
pub use io::{ModelDocument, ParseError};
pub use linalg::Mat;
pub use model::{Direction, Element, ElementId, ElementKind, Node, NodeId, StructuralModel};
pub use redundancy::{
    compute_redundancy, compute_stiffness, invert_stiffness, redundancy_deviation, solve, LoadCase,
    RedundancyReport, SolveResult, SystemState,
};
pub use scalar::Scalar;
pub use updates::{
    delta_add_diagonal, exchange_gate, removability_gate, update_add, update_exchange,
    update_exchange_element, update_remove, woodbury_update_inverse, RowSelection, UpdateGate,
    UpdateOp,
};

pub type SystemState64 = SystemState<f64>;
pub type SystemState32 = SystemState<f32>;
pub type Model64 = StructuralModel<f64>;
pub type Model32 = StructuralModel<f32>;
pub type Mat64 = Mat<f64>;
