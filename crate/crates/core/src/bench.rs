//! The scalable spatial truss family and the recompute-versus-update timing
//! harness.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::assembly::{assemble_system, ElementBlock};
use crate::error::{Error, Result};
use crate::model::{Element, ElementId, Node, NodeId, StructuralModel};
use crate::redundancy::{redundancy_deviation, SystemState};
use crate::updates::{update_add, update_exchange, update_remove, RowSelection};

/// Default seed for the element selection; overridden by `REDMX_SEED`.
pub const DEFAULT_SEED: u64 = 0x5eed;

/// Lattice truss on the grid `(0..=k)³`.
///
/// Every node on the planes `x = 0`, `y = 0` or `z = 0` is fixed. Each of the
/// `k³` free nodes gets three axis-aligned bars to its lower neighbours and
/// two face diagonals to lower nodes; the skipped face cycles with
/// `(i + j + l) mod 3`. Sweeping nodes in lexicographic order, each free node
/// is held by three orthogonal bars to already-held nodes, so the structure
/// is kinematically determinate with `n_s = 2k³`.
pub fn generate_scalable_truss(k: usize) -> Result<StructuralModel<f64>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let side = k + 1;
    let id = |i: usize, j: usize, l: usize| (i * side * side + j * side + l + 1) as NodeId;
    let mut nodes = Vec::with_capacity(side * side * side);
    for i in 0..side {
        for j in 0..side {
            for l in 0..side {
                let coords = [i as f64, j as f64, l as f64];
                nodes.push(if i == 0 || j == 0 || l == 0 {
                    Node::pinned(id(i, j, l), &coords)
                } else {
                    Node::free(id(i, j, l), &coords)
                });
            }
        }
    }
    let mut elements = Vec::with_capacity(5 * k * k * k);
    let mut next: ElementId = 1;
    let mut bar = |a: NodeId, b: NodeId, out: &mut Vec<Element<f64>>| {
        out.push(Element::truss(next, b, a, 1.0, 1.0));
        next += 1;
    };
    for i in 1..side {
        for j in 1..side {
            for l in 1..side {
                let me = id(i, j, l);
                bar(me, id(i - 1, j, l), &mut elements);
                bar(me, id(i, j - 1, l), &mut elements);
                bar(me, id(i, j, l - 1), &mut elements);
                let faces = [
                    id(i - 1, j - 1, l),
                    id(i, j - 1, l - 1),
                    id(i - 1, j, l - 1),
                ];
                let skip = (i + j + l) % 3;
                for (f, &other) in faces.iter().enumerate() {
                    if f != skip {
                        bar(me, other, &mut elements);
                    }
                }
            }
        }
    }
    Ok(StructuralModel::new(3, nodes, elements)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Add,
    Remove,
    Exchange,
    All,
}

impl Scenario {
    fn add(self) -> bool {
        matches!(self, Scenario::Add | Scenario::All)
    }

    fn remove(self) -> bool {
        matches!(self, Scenario::Remove | Scenario::All)
    }

    fn exchange(self) -> bool {
        matches!(self, Scenario::Exchange | Scenario::All)
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "add" => Ok(Scenario::Add),
            "remove" => Ok(Scenario::Remove),
            "exchange" => Ok(Scenario::Exchange),
            "all" => Ok(Scenario::All),
            _ => Err(Error::Config(format!("unknown scenario {s:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub k_values: Vec<usize>,
    pub repetitions: usize,
    pub scenario: Scenario,
    /// Untimed runs of each update before measuring. The recomputation is
    /// warmed up only when `k` is at most `recompute_warmup_max_k`.
    pub warmup: usize,
    pub recompute_warmup_max_k: usize,
    pub seed: u64,
    /// Check the updated state against a recomputation at the smallest `k`.
    pub verify: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            k_values: vec![4, 6, 8, 10],
            repetitions: 3,
            scenario: Scenario::All,
            warmup: 1,
            recompute_warmup_max_k: 10,
            seed: DEFAULT_SEED,
            verify: true,
        }
    }
}

impl BenchConfig {
    /// Seed from `REDMX_SEED` if set and valid.
    pub fn seed_from_env() -> u64 {
        std::env::var("REDMX_SEED")
            .ok()
            .and_then(|s| s.trim().parse().ok())
            .unwrap_or(DEFAULT_SEED)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k_values.is_empty() {
            return Err(Error::Config("no k values".into()));
        }
        if let Some(k) = self.k_values.iter().find(|&&k| k < 2) {
            return Err(Error::Config(format!("k = {k} is below 2")));
        }
        if self.repetitions < 3 {
            return Err(Error::Config("at least 3 repetitions are required".into()));
        }
        Ok(())
    }
}

/// Median and mean of a timing series, in milliseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Timing {
    pub median_ms: f64,
    pub mean_ms: f64,
}

impl Timing {
    fn from_samples(samples: &[f64]) -> Self {
        let mut s = samples.to_vec();
        s.sort_by(f64::total_cmp);
        let mid = s.len() / 2;
        let median_ms = if s.len() % 2 == 1 {
            s[mid]
        } else {
            0.5 * (s[mid - 1] + s[mid])
        };
        Self {
            median_ms,
            mean_ms: s.iter().sum::<f64>() / s.len() as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub k: usize,
    pub n_e: usize,
    pub n: usize,
    pub t_recompute: Timing,
    pub t_add: Option<Timing>,
    pub t_remove: Option<Timing>,
    pub t_exchange: Option<Timing>,
    /// Element removed, re-added and exchanged.
    pub element: ElementId,
    /// Element whose duplicate replaces `element` in the exchange.
    pub partner: ElementId,
    /// Some median is below the timer's practical resolution.
    pub resolution_limited: bool,
}

impl BenchRecord {
    pub fn speedup(&self, t: Option<Timing>) -> Option<f64> {
        t.map(|t| self.t_recompute.median_ms / t.median_ms)
    }

    pub fn series(&self, s: Series) -> Option<f64> {
        match s {
            Series::Recompute => Some(self.t_recompute.median_ms),
            Series::Add => self.t_add.map(|t| t.median_ms),
            Series::Remove => self.t_remove.map(|t| t.median_ms),
            Series::Exchange => self.t_exchange.map(|t| t.median_ms),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Series {
    Recompute,
    Add,
    Remove,
    Exchange,
}

fn ms(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

/// Picks the element to modify and the partner whose duplicate it is
/// exchanged with.
///
/// Candidates are bars attached to a node at least two layers away from the
/// supports, with redundancy above `1e-3` so that removal is admissible. Small
/// lattices without such nodes fall back to all removable bars.
fn choose_elements(
    model: &StructuralModel<f64>,
    state: &SystemState<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(ElementId, ElementId)> {
    let side = (k + 1) as NodeId;
    let interior = |nid: NodeId| {
        let v = nid - 1;
        let (i, j, l) = (v / (side * side), (v / side) % side, v % side);
        [i, j, l].iter().all(|&c| c >= 2 && c + 1 < side)
    };
    let removable = |e: &Element<f64>| {
        let row = state.sys().row_map().get(e.id).expect("assembled").start;
        state.r()[(row, row)] > 1e-3
    };
    let mut pool: Vec<ElementId> = model
        .elements()
        .iter()
        .filter(|e| e.nodes.iter().any(|&n| interior(n)) && removable(e))
        .map(|e| e.id)
        .collect();
    if pool.is_empty() {
        pool = model
            .elements()
            .iter()
            .filter(|e| removable(e))
            .map(|e| e.id)
            .collect();
    }
    let element = *pool
        .choose(rng)
        .ok_or_else(|| Error::BenchGate("no removable element".into()))?;
    let others: Vec<ElementId> = model
        .elements()
        .iter()
        .map(|e| e.id)
        .filter(|&id| id != element)
        .collect();
    let partner = *others
        .choose(rng)
        .ok_or_else(|| Error::BenchGate("no partner element".into()))?;
    Ok((element, partner))
}

fn check_against_oracle(state: &SystemState<f64>, what: &str) -> Result<()> {
    let fresh = state.recomputed()?;
    let dr = redundancy_deviation(state.r(), fresh.r());
    let dk = state.kinv().rel_frobenius_diff(fresh.kinv());
    if dr > 1e-9 || dk > 1e-9 {
        return Err(Error::BenchGate(format!(
            "{what}: relative deviation R {dr:e}, K⁻¹ {dk:e}"
        )));
    }
    Ok(())
}

/// Runs the timing protocol for one `k`.
///
/// Recomputation: assembly, `K`, `K⁻¹` and `R` from the model. Updates, per
/// repetition: remove the chosen element, add it back at its old rows,
/// exchange it for a duplicate of the partner and exchange back. Every step
/// is undone by the next one, so the state stays the same size.
pub fn bench_one(k: usize, cfg: &BenchConfig, verify: bool) -> Result<BenchRecord> {
    let model = generate_scalable_truss(k)?;
    let mut rng =
        ChaCha8Rng::seed_from_u64(cfg.seed ^ (k as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15));

    let mut state: Option<SystemState<f64>> = None;
    if k <= cfg.recompute_warmup_max_k {
        for _ in 0..cfg.warmup {
            drop(state.take());
            state = Some(SystemState::from_model(&model)?);
        }
    }
    let mut recompute = Vec::with_capacity(cfg.repetitions);
    for _ in 0..cfg.repetitions {
        drop(state.take());
        let t = Instant::now();
        let s = SystemState::from_model(&model)?;
        recompute.push(ms(t));
        state = Some(s);
    }
    let mut state = state.expect("at least one repetition");
    state.set_refresh_interval(None);
    state.set_drift_limit(None);
    let (element, partner) = choose_elements(&model, &state, k, &mut rng)?;

    let original = state.sys().element_block(element).expect("assembled");
    let dup = state.sys().element_block(partner).expect("assembled");
    let rows = state.sys().row_map().get(element).expect("assembled");
    let sel = RowSelection::of_element(&state, element)?;

    let (mut t_add, mut t_remove, mut t_exchange) = (Vec::new(), Vec::new(), Vec::new());
    for rep in 0..cfg.warmup + cfg.repetitions {
        let timed = rep >= cfg.warmup;
        let check = verify && rep == cfg.warmup;
        if cfg.scenario.add() || cfg.scenario.remove() {
            let t = Instant::now();
            update_remove(&mut state, &sel)?;
            let dt = ms(t);
            if check {
                check_against_oracle(&state, "remove")?;
            }
            let t = Instant::now();
            update_add(&mut state, &[(element, original.clone())], Some(rows.start))?;
            let da = ms(t);
            if check {
                check_against_oracle(&state, "add")?;
            }
            if timed {
                t_remove.push(dt);
                t_add.push(da);
            }
        }
        if cfg.scenario.exchange() {
            let t = Instant::now();
            update_exchange(&mut state, &sel, &dup)?;
            let d1 = ms(t);
            if check {
                check_against_oracle(&state, "exchange")?;
            }
            let t = Instant::now();
            update_exchange(&mut state, &sel, &original)?;
            let d2 = ms(t);
            if timed {
                t_exchange.extend([d1, d2]);
            }
        }
    }
    if verify {
        check_against_oracle(&state, "round trip")?;
    }

    let timing = |v: &[f64], on: bool| on.then(|| Timing::from_samples(v));
    let t_recompute = Timing::from_samples(&recompute);
    let t_add = timing(&t_add, cfg.scenario.add());
    let t_remove = timing(&t_remove, cfg.scenario.remove());
    let t_exchange = timing(&t_exchange, cfg.scenario.exchange());
    // Below a microsecond the clock, not the update, is being measured.
    let resolution_limited = [Some(t_recompute), t_add, t_remove, t_exchange]
        .iter()
        .flatten()
        .any(|t| t.median_ms < 1e-3);
    Ok(BenchRecord {
        k,
        n_e: model.elements().len(),
        n: state.n(),
        t_recompute,
        t_add,
        t_remove,
        t_exchange,
        element,
        partner,
        resolution_limited,
    })
}

/// Runs every `k` of the configuration in ascending order. The smallest `k`
/// is checked against a recomputation before any timing is reported.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<Vec<BenchRecord>> {
    run_benchmark_with(cfg, |_| {})
}

/// As [`run_benchmark`], calling `progress` after each record.
pub fn run_benchmark_with(
    cfg: &BenchConfig,
    mut progress: impl FnMut(&BenchRecord),
) -> Result<Vec<BenchRecord>> {
    cfg.validate()?;
    let mut ks = cfg.k_values.clone();
    ks.sort_unstable();
    ks.dedup();
    let mut out = Vec::with_capacity(ks.len());
    for (i, &k) in ks.iter().enumerate() {
        let rec = bench_one(k, cfg, cfg.verify && i == 0)?;
        progress(&rec);
        out.push(rec);
    }
    Ok(out)
}

/// Least-squares slope of `log(time)` against `log(n_e)`.
pub fn fit_loglog_slope(records: &[BenchRecord], series: Series) -> Result<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.series(series).map(|t| (r.n_e as f64, t)))
        .collect();
    fit_power_law(&pts)
}

/// Slope of the log-log least-squares line through `(x, y)` points.
pub fn fit_power_law(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 4 {
        return Err(Error::DegenerateFit(format!(
            "need at least 4 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(x, y)| !(x > 0.0) || !(y > 0.0)) {
        return Err(Error::DegenerateFit("non-positive value".into()));
    }
    let lx: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all n_e equal".into()));
    }
    if ly.iter().all(|&y| y == ly[0]) {
        return Err(Error::DegenerateFit("all times equal".into()));
    }
    Ok(sxy / sxx)
}

pub const TABLE_COLUMNS: [&str; 10] = [
    "k",
    "n_e",
    "n",
    "t_recompute_ms",
    "t_add_ms",
    "t_remove_ms",
    "t_exchange_ms",
    "speedup_add",
    "speedup_remove",
    "speedup_exchange",
];

fn cell(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"))
}

/// Tab-delimited table, one row per record.
pub fn format_table(records: &[BenchRecord]) -> String {
    let mut s = TABLE_COLUMNS.join("\t");
    s.push('\n');
    for r in records {
        let row = [
            r.k.to_string(),
            r.n_e.to_string(),
            r.n.to_string(),
            format!("{:.3}", r.t_recompute.median_ms),
            cell(r.t_add.map(|t| t.median_ms), 3),
            cell(r.t_remove.map(|t| t.median_ms), 3),
            cell(r.t_exchange.map(|t| t.median_ms), 3),
            cell(r.speedup(r.t_add), 2),
            cell(r.speedup(r.t_remove), 2),
            cell(r.speedup(r.t_exchange), 2),
        ];
        s.push_str(&row.join("\t"));
        s.push('\n');
    }
    s
}

/// Whitespace-separated data for a log-log plot in gnuplot.
pub fn format_gnuplot(records: &[BenchRecord]) -> String {
    let mut s = String::from(
        "# n_e t_recompute_ms t_add_ms t_remove_ms t_exchange_ms (NaN = not measured)\n",
    );
    for r in records {
        let v = |x: Option<f64>| x.map_or_else(|| "NaN".to_string(), |x| format!("{x:e}"));
        let _ = writeln!(
            s,
            "{} {} {} {} {}",
            r.n_e,
            v(r.series(Series::Recompute)),
            v(r.series(Series::Add)),
            v(r.series(Series::Remove)),
            v(r.series(Series::Exchange))
        );
    }
    s
}

/// Assembles the model for `k` and returns `(n_e, n, n_s)` with `n_s` from the
/// rank check.
pub fn family_counts(k: usize) -> Result<(usize, usize, usize)> {
    let model = generate_scalable_truss(k)?;
    let sys = assemble_system(&model)?;
    let n_s = crate::assembly::check_kinematic_determinacy(&sys)?;
    Ok((model.elements().len(), sys.n(), n_s))
}

/// The element block of `id` in a freshly assembled family member, for use
/// as an add payload in examples and tests.
pub fn family_block(k: usize, id: ElementId) -> Result<ElementBlock<f64>> {
    let sys = assemble_system(&generate_scalable_truss(k)?)?;
    sys.element_block(id).ok_or(Error::UnknownElement(id))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_small_k() {
        for k in 1..=3 {
            let (n_e, n, n_s) = family_counts(k).unwrap();
            assert_eq!((n_e, n, n_s), (5 * k.pow(3), 3 * k.pow(3), 2 * k.pow(3)));
        }
    }

    #[test]
    fn exact_power_laws() {
        let pts2: Vec<(f64, f64)> = (1..6)
            .map(|i| (i as f64 * 10.0, (i as f64 * 10.0).powi(2)))
            .collect();
        assert!((fit_power_law(&pts2).unwrap() - 2.0).abs() < 1e-6);
        let pts3: Vec<(f64, f64)> = (1..6)
            .map(|i| (i as f64 * 7.0, (i as f64 * 7.0).powi(3)))
            .collect();
        assert!((fit_power_law(&pts3).unwrap() - 3.0).abs() < 1e-6);
        let flat: Vec<(f64, f64)> = (1..6).map(|i| (i as f64, 4.0)).collect();
        assert!(matches!(fit_power_law(&flat), Err(Error::DegenerateFit(_))));
        assert!(fit_power_law(&pts2[..3]).is_err());
    }

    #[test]
    fn median_and_mean() {
        let t = Timing::from_samples(&[3.0, 1.0, 2.0, 10.0]);
        assert_eq!(t.median_ms, 2.5);
        assert_eq!(t.mean_ms, 4.0);
    }

    #[test]
    fn config_validation() {
        let mut cfg = BenchConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.repetitions = 2;
        assert!(cfg.validate().is_err());
        cfg.repetitions = 3;
        cfg.k_values = vec![1];
        assert!(cfg.validate().is_err());
        assert_eq!("Exchange".parse::<Scenario>().unwrap(), Scenario::Exchange);
    }
}
