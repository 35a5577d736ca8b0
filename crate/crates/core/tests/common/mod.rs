//! Shared helpers for the integration tests: random kinematically determinate
//! models, a naive dense oracle and the invariant checks.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use redmx::io::{Payload, ScriptStep};
use redmx::{
    assemble_system, check_kinematic_determinacy, exchange_gate, redundancy_deviation,
    removability_gate, DesignState, Element, ElementId, ElementKind, Error, Mat, Node, NodeId,
    RowSelection, StructuralModel, SystemState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Truss2,
    Truss3,
    Frame,
}

fn material(rng: &mut ChaCha8Rng) -> (f64, f64) {
    (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0))
}

/// Jittered grid points, support layer first.
fn grid(rng: &mut ChaCha8Rng, shape: &[usize]) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    let mut idx = vec![0usize; shape.len()];
    loop {
        pts.push(
            idx.iter()
                .map(|&i| i as f64 + rng.gen_range(-0.2..0.2))
                .collect(),
        );
        let mut d = shape.len();
        loop {
            if d == 0 {
                return pts;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(p, q)| (p - q) * (p - q))
        .sum::<f64>()
        .sqrt()
}

/// Indices of the `count` points among `candidates` nearest to `p`.
fn nearest(
    pts: &[Vec<f64>],
    p: usize,
    candidates: impl Iterator<Item = usize>,
    count: usize,
) -> Vec<usize> {
    let mut c: Vec<usize> = candidates.filter(|&q| q != p).collect();
    c.sort_by(|&a, &b| distance(&pts[p], &pts[a]).total_cmp(&distance(&pts[p], &pts[b])));
    c.truncate(count);
    c
}

fn layers(rng: &mut ChaCha8Rng, dim: usize, free_nodes: usize) -> Vec<usize> {
    let mut shape: Vec<usize> = (1..dim).map(|_| rng.gen_range(2..=4)).collect();
    let per_layer: usize = shape.iter().product();
    shape.insert(0, free_nodes.div_ceil(per_layer).max(1) + 1);
    shape
}

/// A random kinematically determinate model with `n_s ≥ 1`, at most
/// `max_elements` elements and `κ₁(K) ≤ MAX_CONDITION`.
pub fn random_model(seed: u64, family: Family, max_elements: usize) -> StructuralModel<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let model = match family {
            Family::Truss2 => random_truss(&mut rng, 2, max_elements),
            Family::Truss3 => random_truss(&mut rng, 3, max_elements),
            Family::Frame => random_frame(&mut rng, max_elements),
        };
        let Some(model) = model else { continue };
        let Ok(sys) = assemble_system(&model) else {
            continue;
        };
        if !matches!(check_kinematic_determinacy(&sys), Ok(n_s) if n_s >= 1) {
            continue;
        }
        if SystemState::new(sys).is_ok_and(|s| condition(&s) <= MAX_CONDITION) {
            return model;
        }
    }
}

pub fn any_family(seed: u64) -> Family {
    [Family::Truss2, Family::Truss3, Family::Frame][(seed % 3) as usize]
}

/// Truss on a jittered grid: the first layer is pinned, every other node is
/// held by bars to its `dim` nearest predecessors, plus extra bars to near
/// neighbours.
fn random_truss(
    rng: &mut ChaCha8Rng,
    dim: usize,
    max_elements: usize,
) -> Option<StructuralModel<f64>> {
    let budget = max_elements.max(2 * dim);
    let free = rng.gen_range(1..=(budget / (dim + 1)).max(1));
    let shape = layers(rng, dim, free);
    let pts = grid(rng, &shape);
    let support_layer: usize = shape[1..].iter().product();
    let nodes: Vec<Node<f64>> = pts
        .iter()
        .enumerate()
        .map(|(i, p)| {
            if i < support_layer {
                Node::pinned(i as NodeId + 1, p)
            } else {
                Node::free(i as NodeId + 1, p)
            }
        })
        .collect();
    let mut elements = Vec::new();
    let bar = |rng: &mut ChaCha8Rng, a: usize, b: usize, out: &mut Vec<Element<f64>>| {
        let (e, ar) = material(rng);
        out.push(Element::truss(
            out.len() as ElementId + 1,
            a as NodeId + 1,
            b as NodeId + 1,
            e,
            ar,
        ));
    };
    for p in support_layer..pts.len() {
        for q in nearest(&pts, p, 0..p, dim) {
            bar(rng, p, q, &mut elements);
        }
    }
    if elements.len() >= budget {
        return None;
    }
    let extras = rng.gen_range(1..=(budget - elements.len()).min(pts.len()));
    for _ in 0..extras {
        let p = rng.gen_range(support_layer..pts.len());
        let q = *nearest(&pts, p, 0..pts.len(), 6).choose(rng)?;
        bar(rng, p, q, &mut elements);
    }
    StructuralModel::new(dim, nodes, elements).ok()
}

/// Plane frame on a jittered grid: a support row of clamped and pinned
/// nodes, beam nodes hanging from the nearest beam-capable predecessor,
/// truss nodes held by two bars, and extra bars and beams.
fn random_frame(rng: &mut ChaCha8Rng, max_elements: usize) -> Option<StructuralModel<f64>> {
    let budget = max_elements.max(4);
    let free = rng.gen_range(1..=(budget / 3).max(1));
    let shape = layers(rng, 2, free);
    let pts = grid(rng, &shape);
    let support_row = shape[1];
    let clamped: Vec<bool> = (0..support_row)
        .map(|i| i == 0 || rng.gen_bool(0.5))
        .collect();
    let mut nodes: Vec<Node<f64>> = Vec::with_capacity(pts.len());
    let mut rotational: Vec<usize> = Vec::new();
    for (i, p) in pts.iter().enumerate() {
        let id = i as NodeId + 1;
        nodes.push(match clamped.get(i) {
            Some(true) => {
                rotational.push(i);
                Node::clamped(id, p)
            }
            Some(false) => Node::pinned(id, p),
            None => Node::free(id, p),
        });
    }
    let mut elements: Vec<Element<f64>> = Vec::new();
    let next = |els: &Vec<Element<f64>>| els.len() as ElementId + 1;
    for p in support_row..pts.len() {
        let (e, a) = material(rng);
        let id = p as NodeId + 1;
        if rng.gen_bool(0.6) {
            let q = nearest(&pts, p, rotational.iter().copied(), 1)[0];
            elements.push(Element::beam(
                next(&elements),
                id,
                q as NodeId + 1,
                e,
                a,
                rng.gen_range(0.05..0.5),
            ));
            rotational.push(p);
        } else {
            for q in nearest(&pts, p, 0..p, 2) {
                elements.push(Element::truss(next(&elements), id, q as NodeId + 1, e, a));
            }
        }
    }
    if elements.len() >= budget {
        return None;
    }
    let extras = rng.gen_range(1..=(budget - elements.len()).min(pts.len()));
    for _ in 0..extras {
        let (e, a) = material(rng);
        let p = rng.gen_range(support_row..pts.len());
        if rotational.contains(&p) && rng.gen_bool(0.4) {
            let q = *nearest(&pts, p, rotational.iter().copied(), 3).choose(rng)?;
            elements.push(Element::beam(
                next(&elements),
                p as NodeId + 1,
                q as NodeId + 1,
                e,
                a,
                rng.gen_range(0.05..0.5),
            ));
        } else {
            let q = *nearest(&pts, p, 0..pts.len(), 6).choose(rng)?;
            elements.push(Element::truss(
                next(&elements),
                p as NodeId + 1,
                q as NodeId + 1,
                e,
                a,
            ));
        }
    }
    StructuralModel::new(2, nodes, elements).ok()
}

/// `K⁻¹` and `R` by the textbook formulas: dense `K = AᵀCA`, Gauss–Jordan
/// inversion with partial pivoting, `R = I − A·K⁻¹·Aᵀ·C`.
pub fn naive_oracle(a: &Mat<f64>, c: &[f64]) -> (Mat<f64>, Mat<f64>) {
    let (n_q, n) = a.shape();
    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n_q {
        let nz: Vec<(usize, f64)> = (0..n)
            .filter(|&j| a[(i, j)] != 0.0)
            .map(|j| (j, a[(i, j)]))
            .collect();
        for &(p, x) in &nz {
            for &(q, y) in &nz {
                k[p][q] += x * c[i] * y;
            }
        }
    }
    let mut inv: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| k[x][col].abs().total_cmp(&k[y][col].abs()))
            .unwrap();
        k.swap(col, piv);
        inv.swap(col, piv);
        let d = k[col][col];
        for j in 0..n {
            k[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r != col && k[r][col] != 0.0 {
                let f = k[r][col];
                for j in 0..n {
                    k[r][j] -= f * k[col][j];
                    inv[r][j] -= f * inv[col][j];
                }
            }
        }
    }
    // X = K⁻¹·Aᵀ·C, column i is K⁻¹ a_iᵀ c_i.
    let mut x = vec![vec![0.0; n_q]; n];
    for i in 0..n_q {
        for j in 0..n {
            let aij = a[(i, j)];
            if aij != 0.0 {
                for p in 0..n {
                    x[p][i] += inv[p][j] * aij * c[i];
                }
            }
        }
    }
    let mut r = Mat::identity(n_q);
    for i in 0..n_q {
        for p in 0..n {
            let aip = a[(i, p)];
            if aip != 0.0 {
                for j in 0..n_q {
                    r[(i, j)] -= aip * x[p][j];
                }
            }
        }
    }
    let kinv = Mat::from_fn(n, n, |i, j| inv[i][j]);
    (kinv, r)
}

/// Relative Frobenius deviations of `R` and `K⁻¹` from the naive oracle.
pub fn oracle_deviation(state: &SystemState<f64>) -> (f64, f64) {
    let (kinv, r) = naive_oracle(&state.sys().a_dense(), state.sys().c());
    (
        redundancy_deviation(state.r(), &r),
        state.kinv().rel_frobenius_diff(&kinv),
    )
}

pub const TRACE_TOL: f64 = 1e-8;
pub const IDEMPOTENCE_TOL: f64 = 1e-8;
pub const DIAGONAL_TOL: f64 = 1e-9;
pub const MONOTONE_TOL: f64 = 1e-10;
pub const ORACLE_TOL: f64 = 1e-9;
/// Largest `κ₁(K)` a random update may produce; beyond it no method,
/// the oracle included, resolves `R` to `ORACLE_TOL`.
pub const MAX_CONDITION: f64 = 1e6;

fn norm1(m: &Mat<f64>) -> f64 {
    (0..m.ncols())
        .map(|j| (0..m.nrows()).map(|i| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Smallest removability-gate rcond a random remove or exchange may have.
/// Woodbury downdates lose about `log₁₀(1/rcond)` digits, so proposals
/// through nearly singular gates cannot meet `ORACLE_TOL`.
pub const MIN_GATE_RCOND: f64 = 1e-3;

/// Whether `step` removes or replaces elements through well-conditioned gates.
pub fn well_posed(design: &DesignState<f64>, step: &ScriptStep<f64>) -> bool {
    let state = design.state();
    let (ids, payload) = match step {
        ScriptStep::Add { .. } => return true,
        ScriptStep::Remove { ids } => (ids.clone(), None),
        ScriptStep::Exchange { id, payload } => (vec![*id], Some(payload)),
    };
    let Ok(sel) = RowSelection::of_elements(state, &ids) else {
        return false;
    };
    if !removability_gate(state, &sel).is_ok_and(|g| g.rcond >= MIN_GATE_RCOND) {
        return false;
    }
    let Some(Payload::Element {
        kind,
        nodes,
        youngs_modulus,
        area,
        inertia,
    }) = payload
    else {
        return true;
    };
    let element = Element {
        id: ids[0],
        kind: *kind,
        nodes: *nodes,
        youngs_modulus: *youngs_modulus,
        area: *area,
        inertia: *inertia,
    };
    let (Some(model), Some(dofs)) = (design.model(), design.dofs()) else {
        return true;
    };
    match redmx::assembly::assemble_element(model, &element, dofs) {
        Ok(block) if block.n_modes() == sel.len() => {
            exchange_gate(state, &sel, &block).is_ok_and(|g| g.rcond >= MIN_GATE_RCOND)
        }
        _ => true,
    }
}

/// `κ₁` of the Jacobi-scaled stiffness `D·K·D`, `D = diag(K)^(-1/2)`, which
/// does not depend on the units of the DOFs.
pub fn condition(state: &SystemState<f64>) -> f64 {
    let k = redmx::compute_stiffness(state.sys());
    let d: Vec<f64> = k.diagonal().iter().map(|x| x.sqrt()).collect();
    let scaled = Mat::from_fn(k.nrows(), k.ncols(), |i, j| k[(i, j)] / (d[i] * d[j]));
    let kinv = state.kinv();
    let scaled_inv = Mat::from_fn(k.nrows(), k.ncols(), |i, j| kinv[(i, j)] * d[i] * d[j]);
    norm1(&scaled) * norm1(&scaled_inv)
}

/// Trace, idempotence and diagonal-range checks.
pub fn check_invariants(state: &SystemState<f64>) -> Result<(), String> {
    let r = state.r();
    let n_q = state.n_q() as f64;
    let trace = r.trace();
    if (trace - state.n_s() as f64).abs() > TRACE_TOL {
        return Err(format!("trace {trace} but n_s = {}", state.n_s()));
    }
    let idem = r.matmul(r).max_abs_diff(r);
    if idem > IDEMPOTENCE_TOL * n_q {
        return Err(format!("max |R² − R| = {idem:e}"));
    }
    for (i, d) in r.diagonal().into_iter().enumerate() {
        if !(-DIAGONAL_TOL..=1.0 + DIAGONAL_TOL).contains(&d) {
            return Err(format!("diagonal entry {i} = {d}"));
        }
    }
    Ok(())
}

/// Diagonal entries of `R` per element id.
pub fn diagonals_by_element(state: &SystemState<f64>) -> Vec<(ElementId, Vec<f64>)> {
    let r = state.r();
    state
        .sys()
        .row_map()
        .entries()
        .iter()
        .map(|e| (e.id, e.range().map(|i| r[(i, i)]).collect()))
        .collect()
}

/// Largest violation of `after ≥ before` (add) or `after ≤ before` (remove)
/// over elements present in both states.
pub fn monotonicity_violation(
    before: &[(ElementId, Vec<f64>)],
    after: &[(ElementId, Vec<f64>)],
    increasing: bool,
) -> f64 {
    let mut worst = 0.0f64;
    for (id, old) in before {
        if let Some((_, new)) = after.iter().find(|(j, _)| j == id) {
            for (&o, &n) in old.iter().zip(new) {
                let v = if increasing { o - n } else { n - o };
                worst = worst.max(v);
            }
        }
    }
    worst
}

pub fn bits(m: &Mat<f64>) -> Vec<u64> {
    m.as_slice().iter().map(|x| x.to_bits()).collect()
}

/// A random add, remove or exchange against the session's model.
pub fn random_step(rng: &mut ChaCha8Rng, design: &DesignState<f64>) -> ScriptStep<f64> {
    let model = design.model().expect("geometric session");
    let ids: Vec<ElementId> = model.elements().iter().map(|e| e.id).collect();
    let next = ids.iter().max().copied().unwrap_or(0) + 1;
    let supported = |n: NodeId| model.node(n).is_some_and(|n| !n.is_fully_free());
    let mut rotational: Vec<NodeId> = model.beam_nodes().into_iter().collect();
    rotational.extend(
        model
            .nodes()
            .iter()
            .filter(|n| n.fixed_rotation)
            .map(|n| n.id),
    );
    rotational.sort_unstable();
    rotational.dedup();

    let truss_pair = |rng: &mut ChaCha8Rng| loop {
        let pair: Vec<NodeId> = model
            .nodes()
            .choose_multiple(rng, 2)
            .map(|n| n.id)
            .collect();
        if !(supported(pair[0]) && supported(pair[1])) {
            return [pair[0], pair[1]];
        }
    };
    let payload = |rng: &mut ChaCha8Rng, beam: Option<[NodeId; 2]>| {
        let (e, a) = material(rng);
        match beam {
            Some(nodes) => Payload::Element {
                kind: ElementKind::PlaneBeam,
                nodes,
                youngs_modulus: e,
                area: a,
                inertia: Some(rng.gen_range(0.05..0.5)),
            },
            None => Payload::Element {
                kind: ElementKind::Truss,
                nodes: truss_pair(rng),
                youngs_modulus: e,
                area: a,
                inertia: None,
            },
        }
    };
    let beam_pair = |rng: &mut ChaCha8Rng| {
        (model.dim() == 2 && rotational.len() >= 2 && rng.gen_bool(0.4))
            .then(|| {
                let p: Vec<NodeId> = rotational.choose_multiple(rng, 2).copied().collect();
                [p[0], p[1]]
            })
            .filter(|p| !(supported(p[0]) && supported(p[1])))
    };

    let roll = rng.gen_range(0..100);
    if roll < 40 || ids.len() < 3 {
        let beam = beam_pair(rng);
        ScriptStep::Add {
            id: next,
            at: None,
            payload: payload(rng, beam),
        }
    } else if roll < 75 {
        let count = if rng.gen_bool(0.15) { 2 } else { 1 };
        let mut chosen: Vec<ElementId> = ids.choose_multiple(rng, count).copied().collect();
        chosen.sort_unstable();
        ScriptStep::Remove { ids: chosen }
    } else {
        let id = *ids.choose(rng).unwrap();
        let old = model.element(id).unwrap();
        let payload = match rng.gen_range(0..3) {
            // Same element, new material.
            0 => {
                let (e, a) = material(rng);
                Payload::Element {
                    kind: old.kind,
                    nodes: old.nodes,
                    youngs_modulus: e,
                    area: a,
                    inertia: old.inertia.map(|_| rng.gen_range(0.05..0.5)),
                }
            }
            // Elsewhere, same kind.
            1 if old.kind == ElementKind::Truss => payload(rng, None),
            // Kind change between modes counts.
            _ => {
                let beam = beam_pair(rng);
                payload(rng, beam)
            }
        };
        ScriptStep::Exchange { id, payload }
    }
}

/// Errors a random step may legitimately raise.
pub fn is_expected_rejection(err: &Error) -> bool {
    matches!(
        err,
        Error::StaticallyDeterminateRemoval { .. }
            | Error::GateSingular { .. }
            | Error::InvalidBlock(_)
            | Error::UnknownElement(_)
            | Error::ElementFullyConstrained { .. }
    )
}

/// Outcome of driving one model through random updates.
#[derive(Debug, Default, Clone)]
pub struct DriveStats {
    pub applied: usize,
    pub rejected: usize,
    pub worst_oracle: f64,
    pub worst_monotone: f64,
    /// Proposals redrawn for a nearly singular gate or an ill-conditioned `K`.
    pub redrawn: usize,
    /// Applied updates after which drift control recomputed the state.
    pub refreshed: usize,
}

/// Applies `steps` random updates, checking each one against the naive
/// oracle. Rejected updates must leave the state bit-identical.
pub fn drive(
    seed: u64,
    model: StructuralModel<f64>,
    steps: usize,
    invariants: bool,
) -> Result<DriveStats, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa11ce);
    let mut design = DesignState::from_model(model).map_err(|e| e.to_string())?;
    design.state_mut().set_refresh_interval(None);
    let mut stats = DriveStats::default();
    let before_r = |d: &DesignState<f64>| bits(d.state().r());
    let before_k = |d: &DesignState<f64>| bits(d.state().kinv());
    for step_no in 0..steps {
        let (old_r, old_k) = (before_r(&design), before_k(&design));
        let before_diag = diagonals_by_element(design.state());
        let mut trial = design.clone();
        let mut step = random_step(&mut rng, &design);
        let mut outcome = trial.apply(&step);
        let mut redraws = 0;
        let ill_posed = |t: &DesignState<f64>, s: &ScriptStep<f64>, o: &redmx::Result<()>| {
            o.is_ok() && (!well_posed(&design, s) || condition(t.state()) > MAX_CONDITION)
        };
        while ill_posed(&trial, &step, &outcome) && redraws < 100 {
            redraws += 1;
            trial = design.clone();
            step = random_step(&mut rng, &design);
            outcome = trial.apply(&step);
        }
        stats.redrawn += redraws;
        match outcome {
            Ok(()) if ill_posed(&trial, &step, &Ok(())) => {
                return Err(format!(
                    "seed {seed} step {step_no}: no well-conditioned proposal"
                ));
            }
            Ok(()) => {
                design = trial;
                stats.applied += 1;
                if design.state().drift_growth() == 1.0 {
                    stats.refreshed += 1;
                }
                let (dr, dk) = oracle_deviation(design.state());
                stats.worst_oracle = stats.worst_oracle.max(dr).max(dk);
                if dr > ORACLE_TOL || dk > ORACLE_TOL {
                    return Err(format!(
                        "seed {seed} step {step_no} {step:?}: R deviation {dr:e}, K⁻¹ deviation {dk:e}"
                    ));
                }
                let mirror = assemble_system(design.model().unwrap()).map_err(|e| e.to_string())?;
                let da = mirror
                    .a_dense()
                    .max_abs_diff(&design.state().sys().a_dense());
                if da > 1e-12 {
                    return Err(format!(
                        "seed {seed} step {step_no}: mirror A differs by {da:e}"
                    ));
                }
                let after = diagonals_by_element(design.state());
                let v = match step {
                    ScriptStep::Add { .. } => monotonicity_violation(&before_diag, &after, true),
                    ScriptStep::Remove { .. } => {
                        monotonicity_violation(&before_diag, &after, false)
                    }
                    ScriptStep::Exchange { .. } => 0.0,
                };
                stats.worst_monotone = stats.worst_monotone.max(v);
                if v > MONOTONE_TOL {
                    return Err(format!(
                        "seed {seed} step {step_no} {step:?}: monotonicity violated by {v:e}"
                    ));
                }
                if invariants {
                    check_invariants(design.state())
                        .map_err(|m| format!("seed {seed} step {step_no}: {m}"))?;
                }
            }
            Err(err) => {
                if !is_expected_rejection(&err) {
                    return Err(format!(
                        "seed {seed} step {step_no} {step:?}: unexpected error {err}"
                    ));
                }
                if before_r(&trial) != old_r || before_k(&trial) != old_k {
                    return Err(format!(
                        "seed {seed} step {step_no}: rejected update changed the state"
                    ));
                }
                stats.rejected += 1;
            }
        }
    }
    Ok(stats)
}
