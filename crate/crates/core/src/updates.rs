//! Low-rank updates of `K⁻¹` and `R` when elements are added, removed or
//! exchanged.
//!
//! Every update costs `O(n_q²·m + n²·m)` for `m` changed rows. No update forms
//! a product with an `n`-sized inner dimension over all of `R`.
//!
//! All checks, including the gate condition, run before the state is
//! touched, so a failed update leaves the state exactly as it was.

use crate::assembly::ElementBlock;
use crate::error::{Error, Result};
use crate::linalg::{axpy, small_inverse, Mat, SparseRow};
use crate::model::ElementId;
use crate::redundancy::{kinv_times_row, SystemState};
use crate::Scalar;

/// Reciprocal-condition threshold for gate matrices.
pub const GATE_THRESHOLD: f64 = 1e-12;

/// Gate threshold for `T`; single precision cannot resolve `1e-12`.
pub fn gate_threshold<T: Scalar>() -> T {
    T::lit(GATE_THRESHOLD).max(T::epsilon() * T::lit(100.0))
}

/// Floating-point operation counter for the update kernels (per thread).
pub mod flops {
    use std::cell::Cell;

    thread_local!(static COUNT: Cell<u64> = const { Cell::new(0) });

    pub fn reset() {
        COUNT.with(|c| c.set(0));
    }

    pub fn count() -> u64 {
        COUNT.with(Cell::get)
    }

    pub(crate) fn add(n: usize) {
        COUNT.with(|c| c.set(c.get() + n as u64));
    }
}

/// Strictly increasing row indices into the current `A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowSelection(Vec<usize>);

impl RowSelection {
    pub fn new(rows: Vec<usize>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidSelection("empty selection".into()));
        }
        if rows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSelection(format!(
                "{rows:?} is not strictly increasing"
            )));
        }
        Ok(Self(rows))
    }

    /// All rows of the given elements.
    pub fn of_elements<T: Scalar>(state: &SystemState<T>, ids: &[ElementId]) -> Result<Self> {
        let mut rows = Vec::new();
        for &id in ids {
            let e = state
                .sys()
                .row_map()
                .get(id)
                .ok_or(Error::UnknownElement(id))?;
            rows.extend(e.range());
        }
        rows.sort_unstable();
        if rows.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSelection(format!(
                "element listed twice in {ids:?}"
            )));
        }
        Self::new(rows)
    }

    pub fn of_element<T: Scalar>(state: &SystemState<T>, id: ElementId) -> Result<Self> {
        Self::of_elements(state, &[id])
    }

    pub fn rows(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    fn check(&self, n_q: usize) -> Result<()> {
        match self.0.last() {
            Some(&last) if last >= n_q => Err(Error::InvalidSelection(format!(
                "row {last} out of range for n_q = {n_q}"
            ))),
            _ => Ok(()),
        }
    }
}

/// Gate threshold for a state whose `R` may carry accumulated rounding
/// error: a gate that is exactly singular can only be recognised down to
/// that error level.
fn state_threshold<T: Scalar>(state: &SystemState<T>) -> T {
    gate_threshold::<T>().max(T::epsilon() * T::lit(100.0 * state.drift_growth()))
}

/// A gate matrix with its inverse and reciprocal condition estimate.
#[derive(Debug, Clone)]
pub struct UpdateGate<T> {
    pub g: Mat<T>,
    pub inverse: Mat<T>,
    pub rcond: T,
    /// Smallest admissible `rcond`.
    pub threshold: T,
}

impl<T: Scalar> UpdateGate<T> {
    fn new(g: Mat<T>, threshold: T) -> Self {
        let inv = small_inverse(&g);
        Self {
            g,
            inverse: inv.inverse,
            rcond: inv.rcond,
            threshold,
        }
    }

    pub fn is_admissible(&self) -> bool {
        self.rcond >= self.threshold
    }

    /// `1 / rcond`.
    pub fn condition(&self) -> f64 {
        1.0 / self.rcond.to_f64_lossy()
    }
}

/// A modification of the structure.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateOp<T> {
    /// Inserts one or more elements at a row boundary (default: append).
    Add {
        elements: Vec<(ElementId, ElementBlock<T>)>,
        insert_at: Option<usize>,
    },
    Remove {
        selection: RowSelection,
    },
    /// Replaces the selected rows; row count must match the block.
    Exchange {
        selection: RowSelection,
        block: ElementBlock<T>,
    },
}

pub fn apply<T: Scalar>(state: &mut SystemState<T>, op: &UpdateOp<T>) -> Result<()> {
    match op {
        UpdateOp::Add {
            elements,
            insert_at,
        } => update_add(state, elements, *insert_at),
        UpdateOp::Remove { selection } => update_remove(state, selection),
        UpdateOp::Exchange { selection, block } => update_exchange(state, selection, block),
    }
}

/// `target[i][:] += Σ_k left[i][k] · right[k][:]`
fn rank_update_rows<T: Scalar>(target: &mut Mat<T>, left: &Mat<T>, right: &Mat<T>) {
    debug_assert_eq!(left.nrows(), target.nrows());
    debug_assert_eq!(right.ncols(), target.ncols());
    debug_assert_eq!(left.ncols(), right.nrows());
    for i in 0..target.nrows() {
        let out = target.row_mut(i);
        for (k, &l) in left.row(i).iter().enumerate() {
            if l != T::zero() {
                axpy(l, right.row(k), out);
            }
        }
    }
    flops::add(2 * target.nrows() * target.ncols() * left.ncols());
}

/// Rows of `U = K⁻¹·aᵀ`, one per row of `a`.
fn kinv_rows<T: Scalar>(state: &SystemState<T>, rows: &[&SparseRow<T>]) -> Mat<T> {
    let n = state.n();
    let mut ut = Mat::zeros(rows.len(), n);
    for (r, row) in rows.iter().enumerate() {
        kinv_times_row(&state.kinv, row, ut.row_mut(r));
        flops::add(2 * row.nnz() * n);
    }
    ut
}

/// `P[i][k] = a_i · U[:, k]` for every current row.
fn projections<T: Scalar>(state: &SystemState<T>, ut: &Mat<T>) -> Mat<T> {
    let m = ut.nrows();
    let mut p = Mat::zeros(state.n_q(), m);
    for (i, a) in state.sys.rows().iter().enumerate() {
        for k in 0..m {
            p[(i, k)] = a.dot_dense(ut.row(k));
        }
        flops::add(2 * a.nnz() * m);
    }
    p
}

/// `out[r][s] = x[r] · m[r][s]`
fn scale_rows<T: Scalar>(m: &Mat<T>, x: &[T]) -> Mat<T> {
    Mat::from_fn(m.nrows(), m.ncols(), |r, s| x[r] * m[(r, s)])
}

/// `K⁻¹ ← K⁻¹ − Uᵀ·W·U` with `ut` holding `U` row-wise.
fn downdate_kinv<T: Scalar>(state: &mut SystemState<T>, ut: &Mat<T>, w: &Mat<T>) {
    let v = w.matmul(ut);
    let mut left = ut.transpose();
    left.as_mut_slice().iter_mut().for_each(|x| *x = -*x);
    rank_update_rows(&mut state.kinv, &left, &v);
}

/// `R += P·W·Pᵀ·diag(c)`
fn apply_dense_term<T: Scalar>(r: &mut Mat<T>, p: &Mat<T>, w: &Mat<T>, c: &[T]) {
    let q = p.matmul(w);
    let right = Mat::from_fn(p.ncols(), p.nrows(), |k, j| p[(j, k)] * c[j]);
    rank_update_rows(r, &q, &right);
}

fn validate_block<T: Scalar>(block: &ElementBlock<T>, n: usize) -> Result<()> {
    if block.rows.is_empty() || block.rows.len() != block.stiffnesses.len() {
        return Err(Error::InvalidBlock(format!(
            "{} rows but {} stiffnesses",
            block.rows.len(),
            block.stiffnesses.len()
        )));
    }
    if block.rows.iter().any(SparseRow::is_empty) {
        return Err(Error::InvalidBlock("all-zero compatibility row".into()));
    }
    if let Some(c) = block
        .stiffnesses
        .iter()
        .find(|c| !(**c > T::zero()) || !c.is_finite())
    {
        return Err(Error::InvalidBlock(format!(
            "stiffness {c} is not positive"
        )));
    }
    if block.min_width() > n {
        return Err(Error::DimensionMismatch(format!(
            "block references column {} but n = {n}",
            block.min_width() - 1
        )));
    }
    Ok(())
}

/// Quantities shared by the add and exchange formulas for a stacked block
/// `a★` with signed stiffnesses `c★`.
struct Stacked<T> {
    ut: Mat<T>,
    h: Mat<T>,
    w: Mat<T>,
    gate: UpdateGate<T>,
}

fn stacked<T: Scalar>(state: &SystemState<T>, rows: &[&SparseRow<T>], c: &[T]) -> Stacked<T> {
    let m = rows.len();
    let ut = kinv_rows(state, rows);
    let h = Mat::from_fn(m, m, |r, s| rows[r].dot_dense(ut.row(s)));
    let g = Mat::from_fn(
        m,
        m,
        |r, s| if r == s { T::one() } else { T::zero() } + h[(r, s)] * c[s],
    );
    let gate = UpdateGate::new(g, state_threshold(state));
    Stacked {
        w: scale_rows(&gate.inverse, c),
        ut,
        h,
        gate,
    }
}

/// Adds element blocks, inserting their rows at `insert_at` (an element
/// boundary; default append).
pub fn update_add<T: Scalar>(
    state: &mut SystemState<T>,
    elements: &[(ElementId, ElementBlock<T>)],
    insert_at: Option<usize>,
) -> Result<()> {
    if elements.is_empty() {
        return Err(Error::InvalidBlock("no elements to add".into()));
    }
    let mut ids = Vec::with_capacity(elements.len());
    for (id, block) in elements {
        if state.sys.row_map().contains(*id) || ids.contains(id) {
            return Err(Error::DuplicateElement(*id));
        }
        validate_block(block, state.n())?;
        ids.push(*id);
    }
    let at = insert_at.unwrap_or(state.n_q());
    if !state.sys.row_map().is_boundary(at) {
        return Err(Error::InvalidInsertPosition(at));
    }
    let block = ElementBlock::stack(elements.iter().map(|e| &e.1));
    let sizes: Vec<(ElementId, usize)> =
        elements.iter().map(|(id, b)| (*id, b.n_modes())).collect();
    let st = stacked(
        state,
        &block.rows.iter().collect::<Vec<_>>(),
        &block.stiffnesses,
    );
    if !st.gate.is_admissible() {
        return Err(Error::GateSingular {
            rcond: st.gate.rcond.to_f64_lossy(),
        });
    }
    add_prepared(state, &block, &sizes, at, &st);
    state.finish_update(st.gate.condition())
}

fn add_prepared<T: Scalar>(
    state: &mut SystemState<T>,
    block: &ElementBlock<T>,
    sizes: &[(ElementId, usize)],
    at: usize,
    st: &Stacked<T>,
) {
    let m = block.n_modes();
    let n_q = state.n_q();
    let ct = &block.stiffnesses;
    let old = projections(state, &st.ut);
    let shift = |i: usize| if i < at { i } else { i + m };

    let mut p = Mat::zeros(n_q + m, m);
    let mut c = Vec::with_capacity(n_q + m);
    c.extend_from_slice(&state.sys.c()[..at]);
    c.extend_from_slice(ct);
    c.extend_from_slice(&state.sys.c()[at..]);
    for i in 0..n_q {
        p.row_mut(shift(i)).copy_from_slice(old.row(i));
    }
    for r in 0..m {
        p.row_mut(at + r).copy_from_slice(st.h.row(r));
    }

    let r = &mut state.r;
    r.insert_rows_cols(at, m);
    for i in (0..n_q).map(shift) {
        for s in 0..m {
            r[(i, at + s)] = -p[(i, s)] * ct[s];
            r[(at + s, i)] = -p[(i, s)] * c[i];
        }
    }
    for a in 0..m {
        for b in 0..m {
            let delta = if a == b { T::one() } else { T::zero() };
            r[(at + a, at + b)] = delta - st.h[(a, b)] * ct[b];
        }
    }
    apply_dense_term(r, &p, &st.w, &c);
    downdate_kinv(state, &st.ut, &st.w);
    state.sys.insert_block(at, block, sizes);
}

/// The gate `EᵀRE` for removing the selected rows.
pub fn removability_gate<T: Scalar>(
    state: &SystemState<T>,
    selection: &RowSelection,
) -> Result<UpdateGate<T>> {
    selection.check(state.n_q())?;
    let e = selection.rows();
    Ok(UpdateGate::new(
        Mat::from_fn(e.len(), e.len(), |a, b| state.r[(e[a], e[b])]),
        state_threshold(state),
    ))
}

fn owners<T: Scalar>(state: &SystemState<T>, rows: &[usize]) -> Vec<ElementId> {
    let mut ids: Vec<ElementId> = rows
        .iter()
        .filter_map(|&r| state.sys.row_map().owner(r))
        .collect();
    ids.dedup();
    ids
}

/// Removes the selected rows. `R̃` is computed from `R` alone.
pub fn update_remove<T: Scalar>(
    state: &mut SystemState<T>,
    selection: &RowSelection,
) -> Result<()> {
    let gate = removability_gate(state, selection)?;
    if !gate.is_admissible() {
        return Err(Error::StaticallyDeterminateRemoval {
            elements: owners(state, selection.rows()),
            rcond: gate.rcond.to_f64_lossy(),
        });
    }
    remove_prepared(state, selection.rows(), &gate);
    state.finish_update(gate.condition())
}

fn remove_prepared<T: Scalar>(state: &mut SystemState<T>, e: &[usize], gate: &UpdateGate<T>) {
    let m = e.len();
    let n_q = state.n_q();
    let keep = crate::linalg::complement(e, n_q);

    let rows: Vec<&SparseRow<T>> = e.iter().map(|&i| &state.sys.rows()[i]).collect();
    let ut = kinv_rows(state, &rows);
    let ce: Vec<T> = e.iter().map(|&i| state.sys.c()[i]).collect();
    let w = scale_rows(&gate.inverse, &ce);

    let r = &mut state.r;
    // −(SᵀRE)·G⁻¹ and EᵀRS
    let re = Mat::from_fn(keep.len(), m, |i, s| r[(keep[i], e[s])]);
    let mut left = re.matmul(&gate.inverse);
    left.as_mut_slice().iter_mut().for_each(|x| *x = -*x);
    let right = Mat::from_fn(m, keep.len(), |a, j| r[(e[a], keep[j])]);
    r.remove_rows_cols(e);
    rank_update_rows(r, &left, &right);

    // K⁻¹ ← K⁻¹ + Uᵀ·(c·G⁻¹)·U
    let v = w.matmul(&ut);
    rank_update_rows(&mut state.kinv, &ut.transpose(), &v);
    state.sys.remove_rows(e);
}

fn exchange_stacked<T: Scalar>(
    state: &SystemState<T>,
    e: &[usize],
    block: &ElementBlock<T>,
) -> Stacked<T> {
    let mut rows: Vec<&SparseRow<T>> = e.iter().map(|&i| &state.sys.rows()[i]).collect();
    rows.extend(block.rows.iter());
    let mut cs: Vec<T> = e.iter().map(|&i| -state.sys.c()[i]).collect();
    cs.extend_from_slice(&block.stiffnesses);
    stacked(state, &rows, &cs)
}

/// The `2m × 2m` gate of exchanging the selected rows for `block`.
pub fn exchange_gate<T: Scalar>(
    state: &SystemState<T>,
    selection: &RowSelection,
    block: &ElementBlock<T>,
) -> Result<UpdateGate<T>> {
    selection.check(state.n_q())?;
    validate_block(block, state.n())?;
    if block.n_modes() != selection.len() {
        return Err(Error::InvalidBlock(format!(
            "exchange of {} rows needs a block with {} rows, got {}",
            selection.len(),
            selection.len(),
            block.n_modes()
        )));
    }
    Ok(exchange_stacked(state, selection.rows(), block).gate)
}

/// Replaces the selected rows by `block` (same row count); element ids and
/// `n_q` are unchanged.
pub fn update_exchange<T: Scalar>(
    state: &mut SystemState<T>,
    selection: &RowSelection,
    block: &ElementBlock<T>,
) -> Result<()> {
    selection.check(state.n_q())?;
    validate_block(block, state.n())?;
    let e = selection.rows();
    let m = e.len();
    if block.n_modes() != m {
        return Err(Error::InvalidBlock(format!(
            "exchange of {m} rows needs a block with {m} rows, got {}",
            block.n_modes()
        )));
    }
    let st = exchange_stacked(state, e, block);
    if !st.gate.is_admissible() {
        return Err(Error::GateSingular {
            rcond: st.gate.rcond.to_f64_lossy(),
        });
    }

    let ct = &block.stiffnesses;
    let mut p = projections(state, &st.ut);
    for (r, &i) in e.iter().enumerate() {
        p.row_mut(i).copy_from_slice(st.h.row(m + r));
    }
    let mut c = state.sys.c().to_vec();
    for (r, &i) in e.iter().enumerate() {
        c[i] = ct[r];
    }
    let in_e = |i: usize| e.binary_search(&i).is_ok();

    let r = &mut state.r;
    for i in (0..state.sys.n_q()).filter(|&i| !in_e(i)) {
        for (s, &es) in e.iter().enumerate() {
            r[(i, es)] = -p[(i, m + s)] * ct[s];
            r[(es, i)] = -p[(i, m + s)] * c[i];
        }
    }
    for (a, &ea) in e.iter().enumerate() {
        for (b, &eb) in e.iter().enumerate() {
            let delta = if a == b { T::one() } else { T::zero() };
            r[(ea, eb)] = delta - st.h[(m + a, m + b)] * ct[b];
        }
    }
    apply_dense_term(r, &p, &st.w, &c);
    downdate_kinv(state, &st.ut, &st.w);
    state.sys.replace_rows(e, block);
    state.finish_update(st.gate.condition())
}

/// Exchanges element `id` for `block`, keeping the id.
///
/// Blocks with a different number of modes are handled as an add of the new
/// rows directly after the old ones followed by removal of the old rows. Both
/// gates are checked before anything changes.
pub fn update_exchange_element<T: Scalar>(
    state: &mut SystemState<T>,
    id: ElementId,
    block: &ElementBlock<T>,
) -> Result<()> {
    let sel = RowSelection::of_element(state, id)?;
    if block.n_modes() == sel.len() {
        return update_exchange(state, &sel, block);
    }
    validate_block(block, state.n())?;
    let st = stacked(
        state,
        &block.rows.iter().collect::<Vec<_>>(),
        &block.stiffnesses,
    );
    if !st.gate.is_admissible() {
        return Err(Error::GateSingular {
            rcond: st.gate.rcond.to_f64_lossy(),
        });
    }
    // Gate of the old rows in the grown system: R_EE + P_E·W·P_Eᵀ·C_E.
    let e = sel.rows();
    let pe = Mat::from_fn(e.len(), block.n_modes(), |a, k| {
        state.sys.rows()[e[a]].dot_dense(st.ut.row(k))
    });
    let pw = pe.matmul(&st.w);
    let g = Mat::from_fn(e.len(), e.len(), |a, b| {
        let corr: T = (0..block.n_modes()).map(|k| pw[(a, k)] * pe[(b, k)]).sum();
        state.r[(e[a], e[b])] + corr * state.sys.c()[e[b]]
    });
    let gate = UpdateGate::new(g, state_threshold(state));
    if !gate.is_admissible() {
        return Err(Error::GateSingular {
            rcond: gate.rcond.to_f64_lossy(),
        });
    }
    let at = e[e.len() - 1] + 1;
    add_prepared(state, block, &[(id, block.n_modes())], at, &st);
    remove_prepared(state, e, &gate);
    state.finish_update(st.gate.condition() * gate.condition())
}

/// Predicted change of the diagonal of `R` on the existing rows if `block`
/// were added. The state is not modified.
pub fn delta_add_diagonal<T: Scalar>(
    state: &SystemState<T>,
    block: &ElementBlock<T>,
) -> Result<Vec<T>> {
    validate_block(block, state.n())?;
    let st = stacked(
        state,
        &block.rows.iter().collect::<Vec<_>>(),
        &block.stiffnesses,
    );
    if !st.gate.is_admissible() {
        return Err(Error::GateSingular {
            rcond: st.gate.rcond.to_f64_lossy(),
        });
    }
    let p = projections(state, &st.ut);
    let q = p.matmul(&st.w);
    Ok((0..state.n_q())
        .map(|i| crate::linalg::dot(q.row(i), p.row(i)) * state.sys.c()[i])
        .collect())
}

/// `(M − U·Vᵀ)⁻¹ = M⁻¹ + M⁻¹U·(I − VᵀM⁻¹U)⁻¹·VᵀM⁻¹`.
///
/// Returns `M⁻¹U` and the updated inverse.
pub fn woodbury_update_inverse<T: Scalar>(
    minv: &Mat<T>,
    u: &Mat<T>,
    v: &Mat<T>,
) -> Result<(Mat<T>, Mat<T>)> {
    let n = minv.nrows();
    if !minv.is_square() || u.shape() != v.shape() || u.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "M⁻¹ {:?}, U {:?}, V {:?}",
            minv.shape(),
            u.shape(),
            v.shape()
        )));
    }
    let m = u.ncols();
    let minv_u = minv.matmul(u);
    let vt_minv = v.transpose().matmul(minv);
    let vt_minv_u = v.transpose().matmul(&minv_u);
    let gate = UpdateGate::new(Mat::identity(m).sub(&vt_minv_u), gate_threshold());
    if !gate.is_admissible() {
        return Err(Error::GateSingular {
            rcond: gate.rcond.to_f64_lossy(),
        });
    }
    let mut out = minv.clone();
    let left = minv_u.matmul(&gate.inverse);
    rank_update_rows(&mut out, &left, &vt_minv);
    Ok((minv_u, out))
}
