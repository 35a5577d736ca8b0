//! From-scratch computation of `K`, `K⁻¹` and the redundancy matrix
//! `R = I − A·K⁻¹·Aᵀ·C`, displacement solves and redundancy reports.
//!
//! Everything here is the reference the update algorithms are checked
//! against.

use crate::assembly::{assemble_system, SystemMatrices};
use crate::error::{Error, Result};
use crate::linalg::{axpy, spd_inverse, Mat};
use crate::model::{ElementId, StructuralModel};
use crate::Scalar;

/// Absolute threshold below which an element counts as having zero
/// redundancy.
pub const ZERO_REDUNDANCY: f64 = 1e-9;

/// Default number of updates between drift-control recomputations.
pub const DEFAULT_REFRESH_INTERVAL: u64 = 1000;

/// Default bound on the product of gate condition numbers between
/// recomputations. Each update can amplify the rounding error already in
/// `R` and `K⁻¹` by up to its gate's condition number.
pub const DEFAULT_DRIFT_LIMIT: f64 = 1e6;

/// `K = AᵀCA`.
pub fn compute_stiffness<T: Scalar>(sys: &SystemMatrices<T>) -> Mat<T> {
    let n = sys.n();
    let mut k = Mat::zeros(n, n);
    for (row, &c) in sys.rows().iter().zip(sys.c()) {
        for (i, vi) in row.iter() {
            let ci = c * vi;
            for (j, vj) in row.iter() {
                k[(i, j)] += ci * vj;
            }
        }
    }
    k
}

pub fn invert_stiffness<T: Scalar>(k: Mat<T>) -> Result<Mat<T>> {
    spd_inverse(k).map_err(|e| Error::NotPositiveDefinite { pivot: e.pivot })
}

/// `y = K⁻¹·aᵀ` for a sparse row `a`, using the symmetry of `K⁻¹`.
pub(crate) fn kinv_times_row<T: Scalar>(
    kinv: &Mat<T>,
    row: &crate::linalg::SparseRow<T>,
    y: &mut [T],
) {
    y.iter_mut().for_each(|v| *v = T::zero());
    for (k, v) in row.iter() {
        axpy(v, kinv.row(k), y);
    }
}

/// `R = I − A·K⁻¹·Aᵀ·C`, formed in blocks of columns.
///
/// For a block `J`, `Y = −K⁻¹·A_Jᵀ·C_J` is built once; row `i` of `R[:, J]`
/// is then a sparse combination of the rows of `Y` selected by `a_i`.
pub fn compute_redundancy<T: Scalar>(sys: &SystemMatrices<T>, kinv: &Mat<T>) -> Mat<T> {
    let (n, n_q) = (sys.n(), sys.n_q());
    assert_eq!(kinv.shape(), (n, n), "K⁻¹ does not match the system");
    // Flattened copy of A so the inner loop walks contiguous memory.
    let mut ptr = Vec::with_capacity(n_q + 1);
    let mut idx = Vec::new();
    let mut val = Vec::new();
    ptr.push(0);
    for row in sys.rows() {
        for (l, v) in row.iter() {
            idx.push(l as u32);
            val.push(v);
        }
        ptr.push(idx.len());
    }
    let neg_c: Vec<T> = sys.c().iter().map(|&c| -c).collect();
    let mut r = Mat::zeros(n_q, n_q);
    let mut y = vec![T::zero(); n];
    for i in 0..n_q {
        kinv_times_row(kinv, &sys.rows()[i], &mut y);
        let out = r.row_mut(i);
        for j in 0..n_q {
            let mut s = T::zero();
            for p in ptr[j]..ptr[j + 1] {
                s += val[p] * y[idx[p] as usize];
            }
            out[j] = s * neg_c[j];
        }
        out[i] += T::one();
    }
    r
}

/// External loads `f` (length `n`) and pre-deformations `e0` (length `n_q`).
#[derive(Debug, Clone, PartialEq)]
pub struct LoadCase<T> {
    pub f: Vec<T>,
    pub e0: Vec<T>,
}

impl<T: Scalar> LoadCase<T> {
    pub fn zeros(n: usize, n_q: usize) -> Self {
        Self {
            f: vec![T::zero(); n],
            e0: vec![T::zero(); n_q],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult<T> {
    /// Nodal displacements.
    pub d: Vec<T>,
    /// Elastic deformations `A·d − e0`.
    pub e_el: Vec<T>,
}

/// `d = K⁻¹·(f + AᵀC·e0)`, `e_el = A·d − e0`.
pub fn solve<T: Scalar>(
    sys: &SystemMatrices<T>,
    kinv: &Mat<T>,
    load: &LoadCase<T>,
) -> Result<SolveResult<T>> {
    if load.f.len() != sys.n() || load.e0.len() != sys.n_q() {
        return Err(Error::DimensionMismatch(format!(
            "load case has f: {}, e0: {}; system has n = {}, n_q = {}",
            load.f.len(),
            load.e0.len(),
            sys.n(),
            sys.n_q()
        )));
    }
    let mut rhs = load.f.clone();
    for ((row, &c), &e) in sys.rows().iter().zip(sys.c()).zip(&load.e0) {
        for (j, v) in row.iter() {
            rhs[j] += v * c * e;
        }
    }
    let d = kinv.mul_vec(&rhs);
    let e_el = sys
        .rows()
        .iter()
        .zip(&load.e0)
        .map(|(row, &e)| row.dot_dense(&d) - e)
        .collect();
    Ok(SolveResult { d, e_el })
}

/// Per-element redundancy distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct RedundancyReport<T> {
    /// `(element id, Σ R_ii over the element's rows)` in row order.
    pub per_element: Vec<(ElementId, T)>,
    pub diagonal: Vec<T>,
    pub trace: T,
    pub n_s: usize,
    pub zero_redundancy_ids: Vec<ElementId>,
}

impl<T: Scalar> RedundancyReport<T> {
    pub fn redundancy_of(&self, id: ElementId) -> Option<T> {
        self.per_element.iter().find(|e| e.0 == id).map(|e| e.1)
    }
}

/// `‖r − reference‖_F / max(‖reference‖_F, 1)`.
///
/// `R` is a projector of rank `n_s`, so `‖R‖_F ≥ √n_s` and the floor only
/// matters for `n_s = 0`, where `R` vanishes up to rounding.
pub fn redundancy_deviation<T: Scalar>(r: &Mat<T>, reference: &Mat<T>) -> T {
    r.rel_frobenius_diff(reference) * reference.frobenius_norm()
        / reference.frobenius_norm().max(T::one())
}

/// Live analysis state: the system matrices with `K⁻¹` and `R` kept current
/// by the update algorithms.
#[derive(Debug, Clone)]
pub struct SystemState<T: Scalar> {
    pub(crate) sys: SystemMatrices<T>,
    pub(crate) kinv: Mat<T>,
    pub(crate) r: Mat<T>,
    pub(crate) generation: u64,
    pub(crate) refresh_interval: Option<u64>,
    pub(crate) since_refresh: u64,
    pub(crate) drift_limit: Option<f64>,
    pub(crate) growth: f64,
}

impl<T: Scalar> SystemState<T> {
    /// Computes `K⁻¹` and `R` from scratch.
    pub fn new(sys: SystemMatrices<T>) -> Result<Self> {
        if sys.n_q() == 0 {
            return Err(Error::EmptySystem);
        }
        let kinv = invert_stiffness(compute_stiffness(&sys))?;
        let r = compute_redundancy(&sys, &kinv);
        Ok(Self {
            sys,
            kinv,
            r,
            generation: 0,
            refresh_interval: Some(DEFAULT_REFRESH_INTERVAL),
            since_refresh: 0,
            drift_limit: Some(DEFAULT_DRIFT_LIMIT),
            growth: 1.0,
        })
    }

    pub fn from_model(model: &StructuralModel<T>) -> Result<Self> {
        Self::new(assemble_system(model)?)
    }

    pub fn sys(&self) -> &SystemMatrices<T> {
        &self.sys
    }

    pub fn kinv(&self) -> &Mat<T> {
        &self.kinv
    }

    pub fn r(&self) -> &Mat<T> {
        &self.r
    }

    pub fn n(&self) -> usize {
        self.sys.n()
    }

    pub fn n_q(&self) -> usize {
        self.sys.n_q()
    }

    /// Degree of statical indeterminacy, `n_q − n` for a kinematically
    /// determinate system.
    pub fn n_s(&self) -> usize {
        self.n_q() - self.n()
    }

    /// Number of successful updates applied.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Updates between drift-control recomputations; `None` disables them.
    pub fn set_refresh_interval(&mut self, every: Option<u64>) {
        self.refresh_interval = every.filter(|&n| n > 0);
    }

    pub fn refresh_interval(&self) -> Option<u64> {
        self.refresh_interval
    }

    /// Recomputation once the product of gate condition numbers since the
    /// last one exceeds `limit`; `None` disables it.
    pub fn set_drift_limit(&mut self, limit: Option<f64>) {
        self.drift_limit = limit.filter(|&l| l >= 1.0);
    }

    pub fn drift_limit(&self) -> Option<f64> {
        self.drift_limit
    }

    /// Product of the gate condition numbers since the last recomputation.
    pub fn drift_growth(&self) -> f64 {
        self.growth
    }

    /// Recomputes `K⁻¹` and `R` from the current `A` and `C`.
    pub fn refresh(&mut self) -> Result<()> {
        self.kinv = invert_stiffness(compute_stiffness(&self.sys))?;
        self.r = compute_redundancy(&self.sys, &self.kinv);
        self.since_refresh = 0;
        self.growth = 1.0;
        Ok(())
    }

    pub(crate) fn finish_update(&mut self, gate_condition: f64) -> Result<()> {
        self.generation += 1;
        self.since_refresh += 1;
        self.growth *= gate_condition.max(1.0);
        let due = self
            .refresh_interval
            .is_some_and(|n| self.since_refresh >= n)
            || self.drift_limit.is_some_and(|l| self.growth > l);
        // The update itself is complete; a recomputation that fails on a
        // numerically singular K keeps the updated matrices.
        if due && self.refresh().is_err() {
            self.since_refresh = 0;
        }
        Ok(())
    }

    /// Fresh state for the same system, computed from scratch.
    pub fn recomputed(&self) -> Result<Self> {
        Self::new(self.sys.clone())
    }

    pub fn solve(&self, load: &LoadCase<T>) -> Result<SolveResult<T>> {
        solve(&self.sys, &self.kinv, load)
    }

    pub fn report(&self) -> RedundancyReport<T> {
        let diagonal = self.r.diagonal();
        let zeta = T::lit(ZERO_REDUNDANCY);
        let per_element: Vec<(ElementId, T)> = self
            .sys
            .row_map()
            .entries()
            .iter()
            .map(|e| (e.id, diagonal[e.range()].iter().copied().sum()))
            .collect();
        let zero_redundancy_ids = per_element
            .iter()
            .filter(|e| e.1 < zeta)
            .map(|e| e.0)
            .collect();
        RedundancyReport {
            trace: diagonal.iter().copied().sum(),
            per_element,
            diagonal,
            n_s: self.n_s(),
            zero_redundancy_ids,
        }
    }
}
