//! A design session's analysis state: the live [`SystemState`] plus, when the
//! model came with geometry, a mirror of the structural model kept in step
//! with every update.

use crate::assembly::{assemble_element, build_dof_map, DofMap, ElementBlock, SystemMatrices};
use crate::error::{Error, Result};
use crate::io::{ModelDocument, Payload, ScriptStep};
use crate::linalg::SparseRow;
use crate::model::{Element, ElementId, StructuralModel};
use crate::redundancy::{redundancy_deviation, SystemState};
use crate::updates::{
    delta_add_diagonal, update_add, update_exchange_element, update_remove, RowSelection,
};
use crate::Scalar;

/// Relative Frobenius tolerance used by [`DesignState::verify`] by default.
pub const VERIFY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct DesignState<T: Scalar> {
    state: SystemState<T>,
    geometry: Option<Geometry<T>>,
}

#[derive(Debug, Clone)]
struct Geometry<T> {
    model: StructuralModel<T>,
    dofs: DofMap,
}

/// Deviation of the maintained matrices from a full recomputation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Verification {
    pub r_deviation: f64,
    pub kinv_deviation: f64,
    pub tolerance: f64,
}

impl Verification {
    pub fn passed(&self) -> bool {
        self.r_deviation <= self.tolerance && self.kinv_deviation <= self.tolerance
    }
}

/// A step resolved against the current state.
enum Resolved<T> {
    Add {
        id: ElementId,
        at: usize,
        block: ElementBlock<T>,
    },
    Remove(RowSelection),
    Exchange {
        id: ElementId,
        block: ElementBlock<T>,
    },
}

impl<T: Scalar> DesignState<T> {
    pub fn new(doc: ModelDocument<T>) -> Result<Self> {
        match doc {
            ModelDocument::Geometric(model) => Self::from_model(model),
            ModelDocument::Raw(sys) => Self::from_system(sys),
        }
    }

    pub fn from_model(model: StructuralModel<T>) -> Result<Self> {
        let dofs = build_dof_map(&model)?;
        let sys = crate::assembly::assemble_with(&model, &dofs)?;
        Ok(Self {
            state: SystemState::new(sys)?,
            geometry: Some(Geometry { model, dofs }),
        })
    }

    pub fn from_system(sys: SystemMatrices<T>) -> Result<Self> {
        Ok(Self {
            state: SystemState::new(sys)?,
            geometry: None,
        })
    }

    pub fn state(&self) -> &SystemState<T> {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SystemState<T> {
        &mut self.state
    }

    /// The geometric model, if the session has one.
    pub fn model(&self) -> Option<&StructuralModel<T>> {
        self.geometry.as_ref().map(|g| &g.model)
    }

    pub fn dofs(&self) -> Option<&DofMap> {
        self.geometry.as_ref().map(|g| &g.dofs)
    }

    /// Current model as a document: geometric when available, raw otherwise.
    pub fn document(&self) -> ModelDocument<T> {
        match &self.geometry {
            Some(g) => ModelDocument::Geometric(g.model.clone()),
            None => ModelDocument::Raw(self.state.sys().clone()),
        }
    }

    /// Applies one script step. On error nothing changes.
    ///
    /// Raw row payloads on a geometric session drop the geometry, since the
    /// rows need not correspond to any element between nodes.
    pub fn apply(&mut self, step: &ScriptStep<T>) -> Result<()> {
        let (resolved, mirror) = self.resolve(step)?;
        match resolved {
            Resolved::Add { id, at, block } => {
                update_add(&mut self.state, &[(id, block)], Some(at))?
            }
            Resolved::Remove(sel) => update_remove(&mut self.state, &sel)?,
            Resolved::Exchange { id, block } => {
                update_exchange_element(&mut self.state, id, &block)?
            }
        }
        match mirror {
            Some(model) => {
                if let Some(g) = self.geometry.as_mut() {
                    g.model = model;
                }
            }
            None => self.geometry = None,
        }
        Ok(())
    }

    /// Predicted per-element change of redundancy if `step` (an add) were
    /// applied, in row order of the current elements.
    pub fn preview(&self, step: &ScriptStep<T>) -> Result<Vec<(ElementId, T)>> {
        if !matches!(step, ScriptStep::Add { .. }) {
            return Err(Error::InvalidBlock(
                "only additions can be previewed".into(),
            ));
        }
        let (Resolved::Add { block, .. }, _) = self.resolve(step)? else {
            unreachable!()
        };
        let delta = delta_add_diagonal(&self.state, &block)?;
        Ok(self
            .state
            .sys()
            .row_map()
            .entries()
            .iter()
            .map(|e| (e.id, delta[e.range()].iter().copied().sum()))
            .collect())
    }

    /// Compares `R` and `K⁻¹` with a recomputation from the current `A`, `C`.
    /// With geometry, also checks that the mirror assembles to the same
    /// element blocks.
    pub fn verify(&self, tolerance: f64) -> Result<Verification> {
        let fresh = self.state.recomputed()?;
        if let Some(g) = &self.geometry {
            self.check_mirror(g, tolerance)?;
        }
        Ok(Verification {
            r_deviation: redundancy_deviation(self.state.r(), fresh.r()).to_f64_lossy(),
            kinv_deviation: self
                .state
                .kinv()
                .rel_frobenius_diff(fresh.kinv())
                .to_f64_lossy(),
            tolerance,
        })
    }

    fn check_mirror(&self, g: &Geometry<T>, tolerance: f64) -> Result<()> {
        let sys = self.state.sys();
        if g.model.elements().len() != sys.row_map().entries().len() {
            return Err(Error::DimensionMismatch(
                "model mirror has a different element count".into(),
            ));
        }
        let tol = T::lit(tolerance);
        for e in g.model.elements() {
            let mine = sys.element_block(e.id).ok_or(Error::UnknownElement(e.id))?;
            let theirs = assemble_element(&g.model, e, &g.dofs)?;
            let (a, b) = (mine.to_dense(sys.n()), theirs.to_dense(sys.n()));
            let scale = T::one().max(b.max_abs());
            let dc = mine
                .stiffnesses
                .iter()
                .zip(&theirs.stiffnesses)
                .map(|(&x, &y)| (x - y).abs() / x.abs().max(y.abs()))
                .fold(T::zero(), T::max);
            if a.shape() != b.shape() || a.max_abs_diff(&b) > tol * scale || dc > tol {
                return Err(Error::DimensionMismatch(format!(
                    "element {} differs from its geometric definition",
                    e.id
                )));
            }
        }
        Ok(())
    }

    /// Row at which an element with `id` goes to keep ascending id order.
    fn id_position(&self, id: ElementId) -> usize {
        let map = self.state.sys().row_map();
        map.entries()
            .iter()
            .find(|e| e.id > id)
            .map_or(map.total_rows(), |e| e.start)
    }

    fn resolve(&self, step: &ScriptStep<T>) -> Result<(Resolved<T>, Option<StructuralModel<T>>)> {
        let map = self.state.sys().row_map();
        match step {
            ScriptStep::Add { id, at, payload } => {
                if map.contains(*id) {
                    return Err(Error::DuplicateElement(*id));
                }
                let at = at.unwrap_or_else(|| self.id_position(*id));
                let (block, mirror) = match payload {
                    Payload::Rows(groups) => (self.raw_block(groups)?, None),
                    Payload::Element { .. } => {
                        let (element, g) = self.element_from(*id, payload)?;
                        let model = g.model.with_element(element.clone())?;
                        let block = self.block_in(&model, &element, &g.dofs)?;
                        (block, Some(model))
                    }
                };
                Ok((Resolved::Add { id: *id, at, block }, mirror))
            }
            ScriptStep::Remove { ids } => {
                let sel = RowSelection::of_elements(&self.state, ids)?;
                let mirror = match &self.geometry {
                    Some(g) => {
                        let mut model = g.model.clone();
                        for &id in ids {
                            model = model.without_element(id)?;
                        }
                        if model.elements().is_empty()
                            || build_dof_map(&model).ok().as_ref() != Some(&g.dofs)
                        {
                            return Err(Error::InvalidBlock(format!(
                                "removing {ids:?} would change the degrees of freedom"
                            )));
                        }
                        Some(model)
                    }
                    None => None,
                };
                Ok((Resolved::Remove(sel), mirror))
            }
            ScriptStep::Exchange { id, payload } => {
                if !map.contains(*id) {
                    return Err(Error::UnknownElement(*id));
                }
                let (block, mirror) = match payload {
                    Payload::Rows(groups) => (self.raw_block(groups)?, None),
                    Payload::Element { .. } => {
                        let (element, g) = self.element_from(*id, payload)?;
                        let model = g.model.with_replaced(element.clone())?;
                        let block = self.block_in(&model, &element, &g.dofs)?;
                        (block, Some(model))
                    }
                };
                Ok((Resolved::Exchange { id: *id, block }, mirror))
            }
        }
    }

    fn raw_block(&self, groups: &[(T, Vec<T>)]) -> Result<ElementBlock<T>> {
        let n = self.state.n();
        if let Some((_, row)) = groups.iter().find(|g| g.1.len() != n) {
            return Err(Error::DimensionMismatch(format!(
                "payload row has {} entries, system has n = {n}",
                row.len()
            )));
        }
        let (c, rows): (Vec<T>, Vec<SparseRow<T>>) = groups
            .iter()
            .map(|(c, r)| (*c, SparseRow::from_dense(r)))
            .unzip();
        ElementBlock::new(rows, c)
    }

    fn element_from(
        &self,
        id: ElementId,
        payload: &Payload<T>,
    ) -> Result<(Element<T>, &Geometry<T>)> {
        let g = self
            .geometry
            .as_ref()
            .ok_or_else(|| Error::NeedsGeometry(format!("element {id} is given by nodes")))?;
        let Payload::Element {
            kind,
            nodes,
            youngs_modulus,
            area,
            inertia,
        } = payload
        else {
            unreachable!()
        };
        Ok((
            Element {
                id,
                kind: *kind,
                nodes: *nodes,
                youngs_modulus: *youngs_modulus,
                area: *area,
                inertia: *inertia,
            },
            g,
        ))
    }

    /// Assembles `element` within `model`, requiring the DOF layout to stay
    /// as it is.
    fn block_in(
        &self,
        model: &StructuralModel<T>,
        element: &Element<T>,
        dofs: &DofMap,
    ) -> Result<ElementBlock<T>> {
        if &build_dof_map(model)? != dofs {
            return Err(Error::InvalidBlock(format!(
                "element {} would change the degrees of freedom",
                element.id
            )));
        }
        assemble_element(model, element, dofs)
    }
}
