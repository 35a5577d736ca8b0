//! DOF numbering and assembly of the compatibility matrix `A` and the
//! diagonal material matrix `C`.
//!
//! Plane beams are split into three natural deformation modes with diagonal
//! stiffnesses:
//!
//! | mode | row (generalized deformation) | stiffness |
//! |------|-------------------------------|-----------|
//! | axial | `u₂ − u₁` along the element axis | `EA/L` |
//! | symmetric bending | `(θ₂ − θ₁)/√2` | `2EI/L` |
//! | antisymmetric bending | `(θ₁ + θ₂ − 2ψ)/√2`, `ψ = (w₂ − w₁)/L` | `6EI/L` |
//!
//! `aᵀ·diag(c)·a` reproduces the Euler–Bernoulli element stiffness matrix
//! exactly. The per-mode split is fixed so that per-mode redundancies are
//! reproducible.

use std::collections::BTreeMap;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::linalg::{pivoted_qr_rank, Mat, SparseRow};
use crate::model::{Direction, Element, ElementId, ElementKind, NodeId, StructuralModel};
use crate::Scalar;

/// Global numbering of the free degrees of freedom.
///
/// Ordering is node-major (ascending node id), direction-minor
/// (`x, y, z, rotation`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DofMap {
    index: BTreeMap<(NodeId, Direction), usize>,
    n: usize,
}

impl DofMap {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, node: NodeId, dir: Direction) -> Option<usize> {
        self.index.get(&(node, dir)).copied()
    }

    /// `(node, direction)` pairs in DOF order.
    pub fn entries(&self) -> Vec<(NodeId, Direction)> {
        let mut v: Vec<_> = self.index.iter().map(|(&k, &i)| (i, k)).collect();
        v.sort();
        v.into_iter().map(|(_, k)| k).collect()
    }
}

pub fn build_dof_map<T: Scalar>(model: &StructuralModel<T>) -> Result<DofMap> {
    let beam_nodes = model.beam_nodes();
    let mut nodes: Vec<_> = model.nodes().iter().collect();
    nodes.sort_by_key(|n| n.id);
    let mut index = BTreeMap::new();
    let mut n = 0;
    for node in nodes {
        let mut dirs: Vec<Direction> = Direction::translations(model.dim()).to_vec();
        if model.dim() == 2 && beam_nodes.contains(&node.id) {
            dirs.push(Direction::Rot);
        }
        for d in dirs {
            if !node.is_fixed(d) {
                index.insert((node.id, d), n);
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::NoFreeDofs);
    }
    Ok(DofMap { index, n })
}

/// One element's compatibility rows and modal stiffnesses.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementBlock<T> {
    pub rows: Vec<SparseRow<T>>,
    pub stiffnesses: Vec<T>,
}

impl<T: Scalar> ElementBlock<T> {
    /// Builds a block, checking that every stiffness is positive and finite.
    pub fn new(rows: Vec<SparseRow<T>>, stiffnesses: Vec<T>) -> Result<Self> {
        if rows.len() != stiffnesses.len() || rows.is_empty() {
            return Err(Error::InvalidBlock(format!(
                "{} rows but {} stiffnesses",
                rows.len(),
                stiffnesses.len()
            )));
        }
        if let Some(c) = stiffnesses
            .iter()
            .find(|c| !(**c > T::zero()) || !c.is_finite())
        {
            return Err(Error::InvalidBlock(format!(
                "stiffness {c} is not positive"
            )));
        }
        Ok(Self { rows, stiffnesses })
    }

    pub fn from_dense(rows: &Mat<T>, stiffnesses: &[T]) -> Result<Self> {
        Self::new(
            rows.rows_iter().map(SparseRow::from_dense).collect(),
            stiffnesses.to_vec(),
        )
    }

    /// Stacks several blocks into one (for blocked updates).
    pub fn stack<'a>(blocks: impl IntoIterator<Item = &'a ElementBlock<T>>) -> Self {
        let mut rows = Vec::new();
        let mut stiffnesses = Vec::new();
        for b in blocks {
            rows.extend(b.rows.iter().cloned());
            stiffnesses.extend_from_slice(&b.stiffnesses);
        }
        Self { rows, stiffnesses }
    }

    pub fn n_modes(&self) -> usize {
        self.rows.len()
    }

    pub fn to_dense(&self, n: usize) -> Mat<T> {
        let rows: Vec<Vec<T>> = self.rows.iter().map(|r| r.to_dense(n)).collect();
        Mat::from_rows(&rows)
    }

    /// Narrowest column count the rows fit in.
    pub fn min_width(&self) -> usize {
        self.rows
            .iter()
            .map(SparseRow::min_width)
            .max()
            .unwrap_or(0)
    }

    /// `aᵀ·diag(c)·a` as a dense `n×n` matrix.
    pub fn stiffness_contribution(&self, n: usize) -> Mat<T> {
        let mut k = Mat::zeros(n, n);
        for (row, &c) in self.rows.iter().zip(&self.stiffnesses) {
            for (i, vi) in row.iter() {
                for (j, vj) in row.iter() {
                    k[(i, j)] += vi * c * vj;
                }
            }
        }
        k
    }
}

fn direction_vector<T: Scalar>(model: &StructuralModel<T>, e: &Element<T>) -> (Vec<T>, T) {
    let a = &model.node(e.nodes[0]).expect("validated model").coords;
    let b = &model.node(e.nodes[1]).expect("validated model").coords;
    let len = model.length(e);
    let dir = a.iter().zip(b).map(|(&p, &q)| (q - p) / len).collect();
    (dir, len)
}

fn restrict<T: Scalar>(
    element: ElementId,
    coeffs: &[((NodeId, Direction), T)],
    dofs: &DofMap,
) -> Result<SparseRow<T>> {
    let pairs: Vec<(usize, T)> = coeffs
        .iter()
        .filter_map(|&((node, dir), v)| dofs.get(node, dir).map(|i| (i, v)))
        .collect();
    let row = SparseRow::from_pairs(pairs);
    if row.is_empty() {
        return Err(Error::ElementFullyConstrained { element });
    }
    Ok(row)
}

pub fn assemble_truss_block<T: Scalar>(
    model: &StructuralModel<T>,
    element: &Element<T>,
    dofs: &DofMap,
) -> Result<ElementBlock<T>> {
    if element.kind != ElementKind::Truss {
        return Err(Error::InvalidBlock(format!(
            "element {} is not a truss",
            element.id
        )));
    }
    let (dir, len) = direction_vector(model, element);
    if !(len > T::zero()) {
        return Err(crate::error::ModelError::ZeroLength(element.id).into());
    }
    let [n1, n2] = element.nodes;
    let dirs = Direction::translations(model.dim());
    let mut coeffs = Vec::with_capacity(2 * dirs.len());
    for (k, &d) in dirs.iter().enumerate() {
        coeffs.push(((n1, d), -dir[k]));
        coeffs.push(((n2, d), dir[k]));
    }
    let row = restrict(element.id, &coeffs, dofs)?;
    ElementBlock::new(vec![row], vec![element.youngs_modulus * element.area / len])
}

pub fn assemble_beam_block<T: Scalar>(
    model: &StructuralModel<T>,
    element: &Element<T>,
    dofs: &DofMap,
) -> Result<ElementBlock<T>> {
    if element.kind != ElementKind::PlaneBeam || model.dim() != 2 {
        return Err(Error::InvalidBlock(format!(
            "element {} is not a plane beam",
            element.id
        )));
    }
    let inertia = element
        .inertia
        .ok_or(crate::error::ModelError::MissingInertia(element.id))?;
    let (dir, len) = direction_vector(model, element);
    if !(len > T::zero()) {
        return Err(crate::error::ModelError::ZeroLength(element.id).into());
    }
    let (cx, cy) = (dir[0], dir[1]);
    let [n1, n2] = element.nodes;
    use Direction::{Rot, X, Y};
    let two = T::lit(2.0);
    let s = T::one() / two.sqrt();
    let axial = [((n1, X), -cx), ((n1, Y), -cy), ((n2, X), cx), ((n2, Y), cy)];
    let symmetric = [((n1, Rot), -s), ((n2, Rot), s)];
    // ψ = (w₂ − w₁)/L with w = −cy·u + cx·v
    let chord = two / len;
    let antisymmetric = [
        ((n1, X), -cy * chord * s),
        ((n1, Y), cx * chord * s),
        ((n1, Rot), s),
        ((n2, X), cy * chord * s),
        ((n2, Y), -cx * chord * s),
        ((n2, Rot), s),
    ];
    let rows = vec![
        restrict(element.id, &axial, dofs)?,
        restrict(element.id, &symmetric, dofs)?,
        restrict(element.id, &antisymmetric, dofs)?,
    ];
    let ei_l = element.youngs_modulus * inertia / len;
    ElementBlock::new(
        rows,
        vec![
            element.youngs_modulus * element.area / len,
            two * ei_l,
            T::lit(6.0) * ei_l,
        ],
    )
}

pub fn assemble_element<T: Scalar>(
    model: &StructuralModel<T>,
    element: &Element<T>,
    dofs: &DofMap,
) -> Result<ElementBlock<T>> {
    match element.kind {
        ElementKind::Truss => assemble_truss_block(model, element, dofs),
        ElementKind::PlaneBeam => assemble_beam_block(model, element, dofs),
    }
}

/// Contiguous rows owned by one element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ElementRows {
    pub id: ElementId,
    pub start: usize,
    pub len: usize,
}

impl ElementRows {
    pub fn range(&self) -> Range<usize> {
        self.start..self.start + self.len
    }
}

/// Element → row-range bookkeeping, kept in row order.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RowMap {
    entries: Vec<ElementRows>,
}

impl RowMap {
    pub fn from_sizes(sizes: impl IntoIterator<Item = (ElementId, usize)>) -> Self {
        let mut start = 0;
        let entries = sizes
            .into_iter()
            .map(|(id, len)| {
                let e = ElementRows { id, start, len };
                start += len;
                e
            })
            .collect();
        Self { entries }
    }

    pub fn entries(&self) -> &[ElementRows] {
        &self.entries
    }

    pub fn get(&self, id: ElementId) -> Option<ElementRows> {
        self.entries.iter().find(|e| e.id == id).copied()
    }

    pub fn contains(&self, id: ElementId) -> bool {
        self.get(id).is_some()
    }

    pub fn total_rows(&self) -> usize {
        self.entries.last().map_or(0, |e| e.start + e.len)
    }

    /// Element owning `row`.
    pub fn owner(&self, row: usize) -> Option<ElementId> {
        let pos = self.entries.partition_point(|e| e.start + e.len <= row);
        self.entries
            .get(pos)
            .filter(|e| e.range().contains(&row))
            .map(|e| e.id)
    }

    pub fn is_boundary(&self, row: usize) -> bool {
        row == self.total_rows() || self.entries.iter().any(|e| e.start == row)
    }

    pub(crate) fn insert(&mut self, at_row: usize, new: &[(ElementId, usize)]) {
        let pos = self.entries.partition_point(|e| e.start < at_row);
        let added: usize = new.iter().map(|n| n.1).sum();
        for e in &mut self.entries[pos..] {
            e.start += added;
        }
        let mut start = at_row;
        let items: Vec<ElementRows> = new
            .iter()
            .map(|&(id, len)| {
                let e = ElementRows { id, start, len };
                start += len;
                e
            })
            .collect();
        self.entries.splice(pos..pos, items);
    }

    /// Drops the given (sorted) rows, shrinking or deleting their owners.
    pub(crate) fn remove_rows(&mut self, sorted: &[usize]) {
        let mut removed_before = 0;
        let mut it = sorted.iter().peekable();
        for e in &mut self.entries {
            let mut gone = 0;
            while let Some(&&r) = it.peek() {
                if r < e.start + e.len {
                    gone += 1;
                    it.next();
                } else {
                    break;
                }
            }
            e.start -= removed_before;
            e.len -= gone;
            removed_before += gone;
        }
        self.entries.retain(|e| e.len > 0);
    }
}

/// The stacked compatibility rows `A` (`n_q × n`), the material diagonal
/// `C` and the element row map.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemMatrices<T> {
    n: usize,
    rows: Vec<SparseRow<T>>,
    c: Vec<T>,
    row_map: RowMap,
}

impl<T: Scalar> SystemMatrices<T> {
    /// Stacks element blocks in the given order.
    pub fn from_blocks(n: usize, blocks: Vec<(ElementId, ElementBlock<T>)>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::EmptySystem);
        }
        if n == 0 {
            return Err(Error::NoFreeDofs);
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut rows = Vec::new();
        let mut c = Vec::new();
        let mut sizes = Vec::new();
        for (id, b) in blocks {
            if !seen.insert(id) {
                return Err(Error::DuplicateElement(id));
            }
            if b.min_width() > n {
                return Err(Error::DimensionMismatch(format!(
                    "element {id} references column {} but n = {n}",
                    b.min_width() - 1
                )));
            }
            sizes.push((id, b.n_modes()));
            rows.extend(b.rows);
            c.extend(b.stiffnesses);
        }
        Ok(Self {
            n,
            rows,
            c,
            row_map: RowMap::from_sizes(sizes),
        })
    }

    /// Dense `A` and diagonal `C` given directly, one element per row group.
    pub fn from_dense(a: &Mat<T>, c: &[T], groups: &[(ElementId, usize)]) -> Result<Self> {
        if c.len() != a.nrows() || groups.iter().map(|g| g.1).sum::<usize>() != a.nrows() {
            return Err(Error::DimensionMismatch("row groups do not cover A".into()));
        }
        let mut blocks = Vec::new();
        let mut r = 0;
        for &(id, len) in groups {
            let rows = (r..r + len)
                .map(|i| SparseRow::from_dense(a.row(i)))
                .collect();
            blocks.push((id, ElementBlock::new(rows, c[r..r + len].to_vec())?));
            r += len;
        }
        Self::from_blocks(a.ncols(), blocks)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_q(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[SparseRow<T>] {
        &self.rows
    }

    pub fn c(&self) -> &[T] {
        &self.c
    }

    pub fn row_map(&self) -> &RowMap {
        &self.row_map
    }

    pub fn a_dense(&self) -> Mat<T> {
        let rows: Vec<Vec<T>> = self.rows.iter().map(|r| r.to_dense(self.n)).collect();
        if rows.is_empty() {
            return Mat::zeros(0, self.n);
        }
        Mat::from_rows(&rows)
    }

    /// Block currently stored for `id`.
    pub fn element_block(&self, id: ElementId) -> Option<ElementBlock<T>> {
        let e = self.row_map.get(id)?;
        Some(ElementBlock {
            rows: self.rows[e.range()].to_vec(),
            stiffnesses: self.c[e.range()].to_vec(),
        })
    }

    pub(crate) fn insert_block(
        &mut self,
        at: usize,
        block: &ElementBlock<T>,
        ids: &[(ElementId, usize)],
    ) {
        self.rows.splice(at..at, block.rows.iter().cloned());
        self.c.splice(at..at, block.stiffnesses.iter().copied());
        self.row_map.insert(at, ids);
    }

    pub(crate) fn remove_rows(&mut self, sorted: &[usize]) {
        for &r in sorted.iter().rev() {
            self.rows.remove(r);
            self.c.remove(r);
        }
        self.row_map.remove_rows(sorted);
    }

    pub(crate) fn replace_rows(&mut self, sorted: &[usize], block: &ElementBlock<T>) {
        for (k, &r) in sorted.iter().enumerate() {
            self.rows[r] = block.rows[k].clone();
            self.c[r] = block.stiffnesses[k];
        }
    }
}

/// Assembles `A` and `C` with element blocks stacked in ascending id order.
pub fn assemble_system<T: Scalar>(model: &StructuralModel<T>) -> Result<SystemMatrices<T>> {
    let dofs = build_dof_map(model)?;
    assemble_with(model, &dofs)
}

pub fn assemble_with<T: Scalar>(
    model: &StructuralModel<T>,
    dofs: &DofMap,
) -> Result<SystemMatrices<T>> {
    let mut elements: Vec<_> = model.elements().iter().collect();
    elements.sort_by_key(|e| e.id);
    let blocks = elements
        .into_iter()
        .map(|e| Ok((e.id, assemble_element(model, e, dofs)?)))
        .collect::<Result<Vec<_>>>()?;
    SystemMatrices::from_blocks(dofs.n(), blocks)
}

/// Largest singular value of `A`, by power iteration on `AᵀA`.
fn sigma_max<T: Scalar>(sys: &SystemMatrices<T>) -> T {
    let n = sys.n();
    let mut x: Vec<T> = (0..n)
        .map(|i| T::one() + T::lit(0.1 * ((i % 7) as f64)))
        .collect();
    let mut lambda = T::zero();
    for _ in 0..60 {
        let nx = x.iter().map(|&v| v * v).sum::<T>().sqrt();
        if nx == T::zero() {
            return T::zero();
        }
        x.iter_mut().for_each(|v| *v /= nx);
        let ax: Vec<T> = sys.rows().iter().map(|r| r.dot_dense(&x)).collect();
        let mut y = vec![T::zero(); n];
        for (r, &s) in sys.rows().iter().zip(&ax) {
            for (c, v) in r.iter() {
                y[c] += v * s;
            }
        }
        lambda = y.iter().zip(&x).map(|(&a, &b)| a * b).sum();
        x = y;
    }
    lambda.max(T::zero()).sqrt()
}

/// Checks `rank(A) = n` by column-pivoted QR and returns `n_s = n_q − rank(A)`.
///
/// Tolerance: `n_q · ε · σ_max(A)`.
pub fn check_kinematic_determinacy<T: Scalar>(sys: &SystemMatrices<T>) -> Result<usize> {
    let (n, n_q) = (sys.n(), sys.n_q());
    let mut cols = vec![vec![T::zero(); n_q]; n];
    for (i, r) in sys.rows().iter().enumerate() {
        for (c, v) in r.iter() {
            cols[c][i] = v;
        }
    }
    let tol = T::from_usize(n_q).unwrap() * T::epsilon() * sigma_max(sys);
    let rank = pivoted_qr_rank(cols, tol);
    if rank < n {
        return Err(Error::RankDeficient { rank, n });
    }
    Ok(n_q - rank)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Node;

    /// Textbook 6×6 plane Euler–Bernoulli stiffness in global coordinates,
    /// DOF order `u1 v1 θ1 u2 v2 θ2`.
    fn textbook_beam(e: f64, a: f64, i: f64, p: [f64; 2], q: [f64; 2]) -> Mat<f64> {
        let (dx, dy) = (q[0] - p[0], q[1] - p[1]);
        let l = (dx * dx + dy * dy).sqrt();
        let (c, s) = (dx / l, dy / l);
        let ea = e * a / l;
        let (k1, k2, k3, k4) = (
            12.0 * e * i / l.powi(3),
            6.0 * e * i / l.powi(2),
            4.0 * e * i / l,
            2.0 * e * i / l,
        );
        let local = Mat::from_rows(&[
            [ea, 0.0, 0.0, -ea, 0.0, 0.0],
            [0.0, k1, k2, 0.0, -k1, k2],
            [0.0, k2, k3, 0.0, -k2, k4],
            [-ea, 0.0, 0.0, ea, 0.0, 0.0],
            [0.0, -k1, -k2, 0.0, k1, -k2],
            [0.0, k2, k4, 0.0, -k2, k3],
        ]);
        let t = Mat::from_rows(&[
            [c, s, 0.0, 0.0, 0.0, 0.0],
            [-s, c, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, c, s, 0.0],
            [0.0, 0.0, 0.0, -s, c, 0.0],
            [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
        ]);
        t.transpose().matmul(&local).matmul(&t)
    }

    fn free_beam(p: [f64; 2], q: [f64; 2]) -> (StructuralModel<f64>, DofMap) {
        // Node 1 carries the support only through a dummy extra node so that
        // all six beam DOFs stay free.
        let nodes = vec![
            Node::free(1, &p),
            Node::free(2, &q),
            Node::clamped(3, &[p[0] - 1.0, p[1] - 3.0]),
        ];
        let els = vec![
            Element::beam(1, 1, 2, 210.0, 3.0, 0.7),
            Element::beam(2, 3, 1, 1.0, 1.0, 1.0),
        ];
        let m = StructuralModel::new(2, nodes, els).unwrap();
        let d = build_dof_map(&m).unwrap();
        (m, d)
    }

    #[test]
    fn beam_gram_matches_textbook() {
        for (p, q) in [
            ([0.0, 0.0], [2.0, 0.0]),
            ([0.3, -1.0], [1.7, 2.5]),
            ([1.0, 1.0], [1.0, -4.0]),
        ] {
            let (m, dofs) = free_beam(p, q);
            let block = assemble_beam_block(&m, m.element(1).unwrap(), &dofs).unwrap();
            let k = block.stiffness_contribution(dofs.n());
            let order: Vec<usize> = [
                (1, Direction::X),
                (1, Direction::Y),
                (1, Direction::Rot),
                (2, Direction::X),
                (2, Direction::Y),
                (2, Direction::Rot),
            ]
            .iter()
            .map(|&(nd, d)| dofs.get(nd, d).unwrap())
            .collect();
            let sub = Mat::from_fn(6, 6, |i, j| k[(order[i], order[j])]);
            let expect = textbook_beam(210.0, 3.0, 0.7, p, q);
            assert!(
                sub.max_abs_diff(&expect) <= 1e-10 * expect.max_abs(),
                "{p:?} {q:?}"
            );
        }
    }

    #[test]
    fn simply_supported_rotational_block() {
        // Pinned at both ends: only the end rotations are free.
        let (e, i, l) = (3.0, 2.0, 4.0);
        let nodes = vec![Node::pinned(1, &[0.0, 0.0]), Node::pinned(2, &[l, 0.0])];
        let m = StructuralModel::new(2, nodes, vec![Element::beam(1, 1, 2, e, 1.0, i)]).unwrap();
        let dofs = build_dof_map(&m).unwrap();
        assert_eq!(dofs.n(), 2);
        // Axial row has no free DOF.
        let err = assemble_beam_block(&m, m.element(1).unwrap(), &dofs).unwrap_err();
        assert_eq!(err, Error::ElementFullyConstrained { element: 1 });
        // Compare with the textbook matrix restricted to the rotations.
        let full = textbook_beam(e, 1.0, i, [0.0, 0.0], [l, 0.0]);
        let restricted =
            Mat::from_rows(&[[full[(2, 2)], full[(2, 5)]], [full[(5, 2)], full[(5, 5)]]]);
        let expect = Mat::from_rows(&[[4.0, 2.0], [2.0, 4.0]]);
        let mut scaled = expect.clone();
        scaled
            .as_mut_slice()
            .iter_mut()
            .for_each(|x| *x *= e * i / l);
        assert!(restricted.max_abs_diff(&scaled) < 1e-12);
    }

    #[test]
    fn cantilever_axial_and_positive_definite() {
        let (e, a, i, l): (f64, f64, f64, f64) = (200.0, 0.5, 0.01, 2.0);
        let nodes = vec![Node::clamped(1, &[0.0, 0.0]), Node::free(2, &[l, 0.0])];
        let m = StructuralModel::new(2, nodes, vec![Element::beam(1, 1, 2, e, a, i)]).unwrap();
        let sys = assemble_system(&m).unwrap();
        assert_eq!(sys.n(), 3);
        let k = ElementBlock {
            rows: sys.rows().to_vec(),
            stiffnesses: sys.c().to_vec(),
        }
        .stiffness_contribution(3);
        assert!((k[(0, 0)] - e * a / l).abs() < 1e-12);
        assert_eq!(k[(0, 1)], 0.0);
        let det = k[(0, 0)] * (k[(1, 1)] * k[(2, 2)] - k[(1, 2)] * k[(2, 1)]);
        assert!(det > 0.0);
        assert_eq!(check_kinematic_determinacy(&sys).unwrap(), 0);
    }

    #[test]
    fn clamped_both_ends_rejected() {
        let nodes = vec![
            Node::clamped(1, &[0.0, 0.0]),
            Node::clamped(2, &[1.0, 0.0]),
            Node::free(3, &[2.0, 0.0]),
        ];
        let els = vec![
            Element::beam(1, 1, 2, 1.0, 1.0, 1.0),
            Element::beam(2, 2, 3, 1.0, 1.0, 1.0),
        ];
        let m = StructuralModel::new(2, nodes, els).unwrap();
        assert_eq!(
            assemble_system(&m).unwrap_err(),
            Error::ElementFullyConstrained { element: 1 }
        );
    }

    #[test]
    fn truss_rows_and_stiffness() {
        let nodes = vec![
            Node::pinned(1, &[0.0, 0.0]),
            Node::free(2, &[0.0, 1.0]),
            Node::free(3, &[1.0, 1.0]),
        ];
        let els = vec![
            Element::truss(1, 1, 2, 200.0, 1.0),
            Element::truss(2, 1, 3, 200.0, 1.0),
        ];
        let m = StructuralModel::new(2, nodes, els).unwrap();
        let sys = assemble_system(&m).unwrap();
        let a = sys.a_dense();
        assert_eq!(a.row(0), &[0.0, 1.0, 0.0, 0.0]);
        let h = 0.5f64.sqrt();
        assert!((a[(1, 2)] - h).abs() < 1e-15 && (a[(1, 3)] - h).abs() < 1e-15);
        assert_eq!(sys.c()[0], 200.0);
        assert!((sys.c()[1] - 100.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fully_fixed_truss_rejected_and_single_bar_rank_deficient() {
        let nodes = vec![
            Node::pinned(1, &[0.0, 0.0]),
            Node::pinned(2, &[1.0, 0.0]),
            Node::free(3, &[0.0, 1.0]),
        ];
        let m = StructuralModel::new(2, nodes.clone(), vec![Element::truss(1, 1, 2, 1.0, 1.0)])
            .unwrap();
        assert_eq!(
            assemble_system(&m).unwrap_err(),
            Error::ElementFullyConstrained { element: 1 }
        );
        let m = StructuralModel::new(2, nodes, vec![Element::truss(1, 1, 3, 1.0, 1.0)]).unwrap();
        let sys = assemble_system(&m).unwrap();
        assert_eq!(sys.n(), 2);
        assert!(matches!(
            check_kinematic_determinacy(&sys),
            Err(Error::RankDeficient { rank: 1, n: 2 })
        ));
    }

    #[test]
    fn single_bar_dof_count() {
        let nodes = vec![Node::pinned(1, &[0.0, 0.0]), Node::free(2, &[1.0, 0.0])];
        let m = StructuralModel::new(2, nodes, vec![Element::truss(1, 1, 2, 1.0, 1.0)]).unwrap();
        assert_eq!(build_dof_map(&m).unwrap().n(), 2);
    }

    #[test]
    fn no_free_dofs() {
        let nodes = vec![Node::pinned(1, &[0.0, 0.0]), Node::pinned(2, &[1.0, 0.0])];
        let m = StructuralModel::<f64>::new(2, nodes, vec![]).unwrap();
        assert_eq!(build_dof_map(&m).unwrap_err(), Error::NoFreeDofs);
    }

    #[test]
    fn row_map_bookkeeping() {
        let mut rm = RowMap::from_sizes([(1, 1), (2, 3), (3, 1)]);
        assert_eq!(rm.owner(2), Some(2));
        assert_eq!(rm.owner(4), Some(3));
        assert_eq!(rm.owner(5), None);
        assert!(rm.is_boundary(1) && !rm.is_boundary(2) && rm.is_boundary(5));
        rm.insert(1, &[(9, 2)]);
        assert_eq!(
            rm.get(9),
            Some(ElementRows {
                id: 9,
                start: 1,
                len: 2
            })
        );
        assert_eq!(rm.get(2).unwrap().start, 3);
        rm.remove_rows(&[1, 2, 4]);
        assert_eq!(
            rm.entries(),
            &[
                ElementRows {
                    id: 1,
                    start: 0,
                    len: 1
                },
                ElementRows {
                    id: 2,
                    start: 1,
                    len: 2
                },
                ElementRows {
                    id: 3,
                    start: 3,
                    len: 1
                },
            ]
        );
    }
}
