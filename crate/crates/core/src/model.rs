//! Structural models: nodes with supports and truss or plane-beam elements.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::ModelError;
use crate::Scalar;

pub type NodeId = u32;
pub type ElementId = u32;

/// A nodal coordinate direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    X,
    Y,
    Z,
    /// In-plane rotation, only present on nodes attached to plane beams.
    Rot,
}

impl Direction {
    pub fn translations(dim: usize) -> &'static [Direction] {
        match dim {
            2 => &[Direction::X, Direction::Y],
            _ => &[Direction::X, Direction::Y, Direction::Z],
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Direction::X => "x",
            Direction::Y => "y",
            Direction::Z => "z",
            Direction::Rot => "r",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node<T> {
    pub id: NodeId,
    pub coords: Vec<T>,
    /// Fixed translational directions, in coordinate order.
    pub fixed: Vec<bool>,
    /// Rotation fixed (clamped); only meaningful for nodes attached to beams.
    pub fixed_rotation: bool,
}

impl<T: Scalar> Node<T> {
    pub fn free(id: NodeId, coords: &[T]) -> Self {
        Self {
            id,
            coords: coords.to_vec(),
            fixed: vec![false; coords.len()],
            fixed_rotation: false,
        }
    }

    /// All translations fixed (pinned support); rotation stays free.
    pub fn pinned(id: NodeId, coords: &[T]) -> Self {
        Self {
            id,
            coords: coords.to_vec(),
            fixed: vec![true; coords.len()],
            fixed_rotation: false,
        }
    }

    /// All translations and the rotation fixed.
    pub fn clamped(id: NodeId, coords: &[T]) -> Self {
        Self {
            fixed_rotation: true,
            ..Self::pinned(id, coords)
        }
    }

    pub fn is_fixed(&self, dir: Direction) -> bool {
        match dir {
            Direction::X => self.fixed.first().copied().unwrap_or(false),
            Direction::Y => self.fixed.get(1).copied().unwrap_or(false),
            Direction::Z => self.fixed.get(2).copied().unwrap_or(false),
            Direction::Rot => self.fixed_rotation,
        }
    }

    pub fn has_support(&self) -> bool {
        self.fixed.iter().any(|&f| f) || self.fixed_rotation
    }

    pub fn is_fully_free(&self) -> bool {
        !self.has_support()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Truss,
    PlaneBeam,
}

impl ElementKind {
    /// Number of load-carrying modes.
    pub fn modes(self) -> usize {
        match self {
            ElementKind::Truss => 1,
            ElementKind::PlaneBeam => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element<T> {
    pub id: ElementId,
    pub kind: ElementKind,
    pub nodes: [NodeId; 2],
    pub youngs_modulus: T,
    pub area: T,
    /// Second moment of area, required for beams.
    pub inertia: Option<T>,
}

impl<T: Scalar> Element<T> {
    pub fn truss(id: ElementId, n1: NodeId, n2: NodeId, youngs_modulus: T, area: T) -> Self {
        Self {
            id,
            kind: ElementKind::Truss,
            nodes: [n1, n2],
            youngs_modulus,
            area,
            inertia: None,
        }
    }

    pub fn beam(
        id: ElementId,
        n1: NodeId,
        n2: NodeId,
        youngs_modulus: T,
        area: T,
        inertia: T,
    ) -> Self {
        Self {
            id,
            kind: ElementKind::PlaneBeam,
            nodes: [n1, n2],
            youngs_modulus,
            area,
            inertia: Some(inertia),
        }
    }
}

/// A validated structural model.
///
/// Construction through [`StructuralModel::new`] checks every invariant, so
/// code holding a model can assume unique ids, existing node references and
/// positive material data.
#[derive(Debug, Clone, PartialEq)]
pub struct StructuralModel<T> {
    dim: usize,
    nodes: Vec<Node<T>>,
    elements: Vec<Element<T>>,
}

impl<T: Scalar> StructuralModel<T> {
    pub fn new(
        dim: usize,
        nodes: Vec<Node<T>>,
        elements: Vec<Element<T>>,
    ) -> Result<Self, ModelError> {
        let model = Self {
            dim,
            nodes,
            elements,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes(&self) -> &[Node<T>] {
        &self.nodes
    }

    pub fn elements(&self) -> &[Element<T>] {
        &self.elements
    }

    pub fn node(&self, id: NodeId) -> Option<&Node<T>> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn element(&self, id: ElementId) -> Option<&Element<T>> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn has_beams(&self) -> bool {
        self.elements
            .iter()
            .any(|e| e.kind == ElementKind::PlaneBeam)
    }

    /// Node ids attached to at least one plane beam.
    pub fn beam_nodes(&self) -> BTreeSet<NodeId> {
        self.elements
            .iter()
            .filter(|e| e.kind == ElementKind::PlaneBeam)
            .flat_map(|e| e.nodes)
            .collect()
    }

    pub fn length(&self, element: &Element<T>) -> T {
        let a = &self.node(element.nodes[0]).expect("validated").coords;
        let b = &self.node(element.nodes[1]).expect("validated").coords;
        a.iter()
            .zip(b)
            .map(|(&p, &q)| (q - p) * (q - p))
            .sum::<T>()
            .sqrt()
    }

    /// Returns a copy with `element` appended. The element is validated
    /// against this model.
    pub fn with_element(&self, element: Element<T>) -> Result<Self, ModelError> {
        let mut elements = self.elements.clone();
        elements.push(element);
        Self::new(self.dim, self.nodes.clone(), elements)
    }

    pub fn without_element(&self, id: ElementId) -> Result<Self, ModelError> {
        let elements = self
            .elements
            .iter()
            .filter(|e| e.id != id)
            .cloned()
            .collect();
        Self::new(self.dim, self.nodes.clone(), elements)
    }

    /// Replaces the element with the same id.
    pub fn with_replaced(&self, element: Element<T>) -> Result<Self, ModelError> {
        let mut elements = self.elements.clone();
        let slot = elements
            .iter_mut()
            .find(|e| e.id == element.id)
            .ok_or(ModelError::UnknownElement(element.id))?;
        *slot = element;
        Self::new(self.dim, self.nodes.clone(), elements)
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.dim != 2 && self.dim != 3 {
            return Err(ModelError::BadDimension(self.dim));
        }
        let mut ids = BTreeMap::new();
        for n in &self.nodes {
            if ids.insert(n.id, n).is_some() {
                return Err(ModelError::DuplicateNode(n.id));
            }
            if n.coords.len() != self.dim || n.fixed.len() != self.dim {
                return Err(ModelError::NodeDimension {
                    node: n.id,
                    dim: self.dim,
                });
            }
            if n.coords.iter().any(|c| !c.is_finite()) {
                return Err(ModelError::NonFinite(format!(
                    "coordinates of node {}",
                    n.id
                )));
            }
        }
        if !self.nodes.iter().any(Node::has_support) {
            return Err(ModelError::NoSupport);
        }
        let mut eids = BTreeSet::new();
        for e in &self.elements {
            if !eids.insert(e.id) {
                return Err(ModelError::DuplicateElement(e.id));
            }
            for &nid in &e.nodes {
                if !ids.contains_key(&nid) {
                    return Err(ModelError::UnknownNode {
                        element: e.id,
                        node: nid,
                    });
                }
            }
            if e.nodes[0] == e.nodes[1] {
                return Err(ModelError::DegenerateElement(e.id));
            }
            if !(e.youngs_modulus > T::zero()) {
                return Err(ModelError::NonPositive {
                    element: e.id,
                    what: "Young's modulus",
                });
            }
            if !(e.area > T::zero()) {
                return Err(ModelError::NonPositive {
                    element: e.id,
                    what: "cross-sectional area",
                });
            }
            if e.kind == ElementKind::PlaneBeam {
                if self.dim != 2 {
                    return Err(ModelError::BeamInSpace(e.id));
                }
                match e.inertia {
                    None => return Err(ModelError::MissingInertia(e.id)),
                    Some(i) if !(i > T::zero()) => {
                        return Err(ModelError::NonPositive {
                            element: e.id,
                            what: "second moment of area",
                        })
                    }
                    _ => {}
                }
            }
            if !(self.length(e) > T::zero()) {
                return Err(ModelError::ZeroLength(e.id));
            }
        }
        Ok(())
    }
}
