//! Branch-and-bound over sparsity patterns.
//!
//! A node fixes some coordinates to zero (`I0`) and some to nonzero (`I1`).
//! Nodes are expanded in order of increasing lower bound, branching on the
//! free coordinate whose relaxed indicator is closest to one half. Children
//! whose zero set leaves `b` out of reach of the remaining columns are
//! discarded and recorded as feasibility cuts; every later node whose zero
//! set contains a cut is discarded without a solve.
//!
//! Upper bounds come from greedy rounding of each node's relaxation,
//! polished to the minimum-norm point on the rounded support.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use nalgebra::DVector;

use crate::conic::ConicSolver;
use crate::oracle::support_optimum;
use crate::relaxations::{compute_gamma0, solve_bpd, solve_node_perspective, solve_node_primal};
use crate::rounding::greedy_round;
use crate::{linalg, Error, IndexSet, ProblemInstance, Result, SolutionVector};

/// Monotonic wall clock in seconds.
pub trait Clock {
    fn now(&self) -> f64;
}

impl<C: Clock + ?Sized> Clock for &C {
    fn now(&self) -> f64 {
        (**self).now()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub i0: IndexSet,
    pub i1: IndexSet,
    pub lower: f64,
    pub relaxation_z: DVector<f64>,
}

impl Node {
    pub fn root(n: usize) -> Self {
        Self {
            i0: IndexSet::new(n),
            i1: IndexSet::new(n),
            lower: 0.0,
            relaxation_z: DVector::zeros(n),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.i0.len() + self.i1.len() == self.i0.universe()
    }
}

/// Every pattern whose zero set contains `zero_set` is infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityCut {
    pub zero_set: IndexSet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbConfig {
    /// Relative optimality tolerance.
    pub delta: f64,
    /// Seconds; `None` runs to completion.
    pub time_limit: Option<f64>,
    /// Restrict the search to these columns.
    pub backbone: Option<IndexSet>,
    /// Solve perspective node relaxations when `gamma < gamma0`.
    pub strict_bounds: bool,
    /// Indicators above this count as selected when proposing incumbents.
    pub fractional_tolerance: f64,
    /// Absolute slack on bound comparisons, covering solver tolerance.
    pub absolute_tolerance: f64,
    /// Compare `gamma` against `gamma0` at startup (costs up to `2n` solves).
    pub check_gamma0: bool,
}

impl Default for BnbConfig {
    fn default() -> Self {
        Self {
            delta: 0.0,
            time_limit: None,
            backbone: None,
            strict_bounds: false,
            fractional_tolerance: 1e-6,
            absolute_tolerance: 1e-7,
            check_gamma0: true,
        }
    }
}

impl BnbConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta >= 0.0) || !self.delta.is_finite() {
            return Err(Error::NonPositiveParameter("delta"));
        }
        if !(self.fractional_tolerance > 0.0) {
            return Err(Error::NonPositiveParameter("fractional_tolerance"));
        }
        if !(self.absolute_tolerance >= 0.0) {
            return Err(Error::NonPositiveParameter("absolute_tolerance"));
        }
        if let Some(t) = self.time_limit {
            if !(t >= 0.0) {
                return Err(Error::NonPositiveParameter("time_limit"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnbStatus {
    OptimalWithinDelta,
    TimeLimit,
    Infeasible,
    TrivialZero,
    /// Stopped by the progress observer.
    Interrupted,
}

impl BnbStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            BnbStatus::OptimalWithinDelta => "OptimalWithinDelta",
            BnbStatus::TimeLimit => "TimeLimit",
            BnbStatus::Infeasible => "Infeasible",
            BnbStatus::TrivialZero => "TrivialZero",
            BnbStatus::Interrupted => "Interrupted",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BnbResult {
    pub x_best: SolutionVector,
    pub upper: f64,
    pub lower: f64,
    pub gap: f64,
    pub nodes_explored: usize,
    pub cuts_added: usize,
    pub status: BnbStatus,
    pub elapsed: f64,
    pub gamma0: Option<f64>,
    pub warnings: Vec<String>,
}

/// `(upper - lower) / upper`, zero when `upper` is zero.
pub fn relative_gap(upper: f64, lower: f64) -> f64 {
    if upper == 0.0 || upper.is_infinite() {
        return 0.0;
    }
    ((upper - lower) / upper.abs()).max(0.0)
}

/// Snapshot handed to the observer after every expanded node.
#[derive(Debug, Clone, Copy)]
pub struct Progress<'a> {
    pub nodes: usize,
    pub upper: f64,
    pub lower: f64,
    pub gap: f64,
    pub elapsed: f64,
    pub open_nodes: usize,
    pub cuts: usize,
    pub incumbent: &'a SolutionVector,
}

impl fmt::Display for Progress<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "nodes={} upper={:.9} lower={:.9} gap={:.6e} elapsed={:.3} open={} cuts={}",
            self.nodes, self.upper, self.lower, self.gap, self.elapsed, self.open_nodes, self.cuts
        )
    }
}

struct PoolEntry {
    lower: f64,
    seq: u64,
    node: Node,
}

impl PartialEq for PoolEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for PoolEntry {}
impl PartialOrd for PoolEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for PoolEntry {
    // reversed so the max-heap yields the least bound, then the oldest
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .lower
            .total_cmp(&self.lower)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Open nodes ordered by lower bound, ties by insertion order.
#[derive(Default)]
pub struct NodePool {
    heap: BinaryHeap<PoolEntry>,
    next_seq: u64,
}

impl NodePool {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, node: Node) {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(PoolEntry {
            lower: node.lower,
            seq,
            node,
        });
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn min_lower(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.lower)
    }

    /// Removes the node with the least lower bound (earliest on ties).
    pub fn select_node(&mut self) -> Result<Node> {
        self.heap.pop().map(|e| e.node).ok_or(Error::EmptyPool)
    }

    /// Drops every node with `lower >= threshold`; returns the least bound
    /// among the dropped nodes.
    pub fn prune(&mut self, threshold: f64) -> Option<f64> {
        let mut dropped: Option<f64> = None;
        self.heap.retain(|e| {
            if e.lower >= threshold {
                dropped = Some(dropped.map_or(e.lower, |d| d.min(e.lower)));
                false
            } else {
                true
            }
        });
        dropped
    }
}

/// Free index whose indicator is closest to one half, lowest index on ties.
pub fn select_branch_index(node: &Node, relaxation_z: &DVector<f64>) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for i in 0..node.i0.universe() {
        if node.i0.contains(i) || node.i1.contains(i) {
            continue;
        }
        let d = (relaxation_z[i] - 0.5).abs();
        match best {
            Some((_, bd)) if d >= bd - 1e-12 => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i).ok_or(Error::CompletePattern)
}

/// True when the node's zero set contains some cut.
pub fn apply_cuts(node: &Node, cuts: &[FeasibilityCut]) -> bool {
    cuts.iter().any(|c| c.zero_set.is_subset(&node.i0))
}

/// Coordinates where the basis pursuit solution has magnitude `>= threshold`.
pub fn compute_backbone<S: ConicSolver + ?Sized>(
    solver: &S,
    inst: &ProblemInstance,
    threshold: f64,
) -> Result<IndexSet> {
    let x = solve_bpd(solver, inst)?;
    Ok(IndexSet::from_indices(
        inst.n(),
        (0..inst.n()).filter(|&i| x.x[i].abs() >= threshold),
    ))
}

/// Relaxed indicators `min(1, w_i |x_i| / sqrt(gamma))`.
pub fn indicators(inst: &ProblemInstance, x: &DVector<f64>) -> DVector<f64> {
    let sg = libm::sqrt(inst.gamma());
    DVector::from_iterator(
        inst.n(),
        (0..inst.n()).map(|i| (inst.weights()[i] * x[i].abs() / sg).min(1.0)),
    )
}

struct Search<'a, S: ?Sized, C: ?Sized> {
    solver: &'a S,
    inst: &'a ProblemInstance,
    config: &'a BnbConfig,
    clock: &'a C,
    start: f64,
    perspective: bool,
    upper: f64,
    incumbent: SolutionVector,
    lower: f64,
    pool: NodePool,
    cuts: Vec<FeasibilityCut>,
    pruned_floor: f64,
    nodes: usize,
}

impl<S: ConicSolver + ?Sized, C: Clock + ?Sized> Search<'_, S, C> {
    fn elapsed(&self) -> f64 {
        self.clock.now() - self.start
    }

    fn remaining(&self) -> Option<f64> {
        self.config.time_limit.map(|t| (t - self.elapsed()).max(0.0))
    }

    fn prune_threshold(&self) -> f64 {
        self.upper * (1.0 - self.config.delta) - self.config.absolute_tolerance
    }

    fn offer(&mut self, x: DVector<f64>) {
        let value = self.inst.objective(&x);
        if value < self.upper && self.inst.is_feasible(&x, 0.0) {
            self.upper = value;
            self.incumbent = SolutionVector::new(x);
            let threshold = self.prune_threshold();
            if let Some(d) = self.pool.prune(threshold) {
                self.pruned_floor = self.pruned_floor.min(d);
            }
        }
    }

    fn offer_support(&mut self, support: &[usize]) {
        if let Some((x, _)) = support_optimum(self.inst, support) {
            self.offer(x);
        }
    }

    /// Greedy rounding of `x` plus the polished rounded support, and the
    /// polished support suggested by the indicators.
    fn propose(&mut self, x: &DVector<f64>, z: &DVector<f64>, i0: &IndexSet, i1: &IndexSet) {
        if let Ok(rounded) = greedy_round(self.inst, x) {
            let support = rounded.support();
            self.offer(rounded.x);
            self.offer_support(&support);
        }
        let tol = self.config.fractional_tolerance;
        let support: Vec<usize> = (0..self.inst.n())
            .filter(|&i| !i0.contains(i) && (i1.contains(i) || z[i] > tol))
            .collect();
        self.offer_support(&support);
    }

    /// Node relaxation at `(i0, i1)`; `None` when the solver gives up.
    fn relax(&self, i0: &IndexSet, i1: &IndexSet) -> Option<(DVector<f64>, f64)> {
        let r = if self.perspective {
            solve_node_perspective(self.solver, self.inst, i0, i1, self.remaining())
        } else {
            solve_node_primal(self.solver, self.inst, i0, i1, self.remaining())
        };
        r.ok().map(|(x, v)| (x.x, v))
    }

    fn global_lower(&self) -> f64 {
        let pool = self.pool.min_lower().unwrap_or(f64::INFINITY);
        let mut lb = pool.min(self.pruned_floor).min(self.upper);
        if self.pool.is_empty() {
            // every pattern is pruned or solved: bounds agree up to the
            // absolute tolerance
            lb = self.upper.min(self.pruned_floor + self.config.absolute_tolerance);
        }
        lb.max(self.lower).min(self.upper)
    }

    fn child(&mut self, parent: &Node, i0: IndexSet, i1: IndexSet, grew_zero: bool) {
        let mut node = Node {
            i0,
            i1,
            lower: parent.lower,
            relaxation_z: parent.relaxation_z.clone(),
        };
        if apply_cuts(&node, &self.cuts) {
            return;
        }
        if grew_zero {
            let cols = node.i0.complement();
            if linalg::subset_residual_sq(self.inst.a(), self.inst.b(), &cols) > self.inst.epsilon() {
                self.cuts.push(FeasibilityCut {
                    zero_set: node.i0.clone(),
                });
                return;
            }
        }
        if node.is_complete() {
            let support = node.i1.to_vec();
            if let Some((x, value)) = support_optimum(self.inst, &support) {
                self.offer(x);
                self.pruned_floor = self.pruned_floor.min(value.max(parent.lower));
            }
            return;
        }
        if let Some((x, value)) = self.relax(&node.i0, &node.i1) {
            node.lower = value.max(parent.lower);
            node.relaxation_z = indicators(self.inst, &x);
            let (z, i0, i1) = (node.relaxation_z.clone(), node.i0.clone(), node.i1.clone());
            self.propose(&x, &z, &i0, &i1);
        }
        if node.lower < self.prune_threshold() {
            self.pool.push(node);
        } else {
            self.pruned_floor = self.pruned_floor.min(node.lower);
        }
    }

    fn finish(self, status: BnbStatus, gamma0: Option<f64>, warnings: Vec<String>) -> BnbResult {
        let lower = if status == BnbStatus::OptimalWithinDelta {
            self.global_lower()
        } else {
            self.lower
        };
        BnbResult {
            gap: relative_gap(self.upper, lower),
            elapsed: self.elapsed(),
            x_best: self.incumbent,
            upper: self.upper,
            lower,
            nodes_explored: self.nodes,
            cuts_added: self.cuts.len(),
            status,
            gamma0,
            warnings,
        }
    }
}

fn guard_result(n: usize, status: BnbStatus, elapsed: f64) -> BnbResult {
    let (upper, lower) = match status {
        BnbStatus::Infeasible => (f64::INFINITY, f64::INFINITY),
        _ => (0.0, 0.0),
    };
    BnbResult {
        x_best: SolutionVector::zeros(n),
        upper,
        lower,
        gap: 0.0,
        nodes_explored: 0,
        cuts_added: 0,
        status,
        elapsed,
        gamma0: None,
        warnings: Vec::new(),
    }
}

/// Runs the search. `observer` sees a [`Progress`] after every expanded
/// node and may stop the run by returning `false`.
pub fn solve<S, C>(
    solver: &S,
    inst: &ProblemInstance,
    config: &BnbConfig,
    clock: &C,
    observer: &mut dyn FnMut(&Progress) -> bool,
) -> Result<BnbResult>
where
    S: ConicSolver + ?Sized,
    C: Clock + ?Sized,
{
    config.validate()?;
    if let Some(bb) = &config.backbone {
        if bb.universe() != inst.n() {
            return Err(Error::DimensionMismatch {
                what: "universe of backbone",
                expected: inst.n(),
                found: bb.universe(),
            });
        }
        let cols = bb.to_vec();
        let start = clock.now();
        if cols.is_empty() {
            let status = if inst.zero_is_feasible() {
                BnbStatus::TrivialZero
            } else {
                BnbStatus::Infeasible
            };
            return Ok(guard_result(inst.n(), status, clock.now() - start));
        }
        let sub = inst.restrict_columns(&cols)?;
        let inner = BnbConfig {
            backbone: None,
            ..config.clone()
        };
        let mut r = solve(solver, &sub, &inner, clock, observer)?;
        let x = linalg::scatter(inst.n(), &cols, &r.x_best.x);
        r.x_best = SolutionVector::new(x);
        if cols.len() < inst.n() {
            r.warnings.push(format!(
                "search restricted to a backbone of {} of {} columns; bounds hold for the restricted problem",
                cols.len(),
                inst.n()
            ));
        }
        return Ok(r);
    }

    let start = clock.now();
    let n = inst.n();
    let all: Vec<usize> = (0..n).collect();
    if linalg::subset_residual_sq(inst.a(), inst.b(), &all) > inst.epsilon() {
        return Ok(guard_result(n, BnbStatus::Infeasible, clock.now() - start));
    }
    if inst.zero_is_feasible() {
        return Ok(guard_result(n, BnbStatus::TrivialZero, clock.now() - start));
    }

    let mut warnings = Vec::new();
    let mut gamma0 = None;
    let mut perspective = false;
    if config.check_gamma0 || config.strict_bounds {
        match compute_gamma0(solver, inst) {
            Ok(g0) => {
                gamma0 = Some(g0);
                if inst.gamma() < g0 {
                    if config.strict_bounds {
                        perspective = true;
                    } else {
                        warnings.push(format!(
                            "gamma = {} is below gamma0 = {}; node bounds are valid but may be loose",
                            inst.gamma(),
                            g0
                        ));
                    }
                }
            }
            Err(e) => {
                perspective = config.strict_bounds;
                warnings.push(format!("gamma0 unavailable: {e}"));
            }
        }
    }

    let mut search = Search {
        solver,
        inst,
        config,
        clock,
        start,
        perspective,
        upper: f64::INFINITY,
        incumbent: SolutionVector::zeros(n),
        lower: 0.0,
        pool: NodePool::new(),
        cuts: Vec::new(),
        pruned_floor: f64::INFINITY,
        nodes: 0,
    };

    // greedy rounding of the least-squares point always succeeds here
    let ls = linalg::pseudo_inverse(inst.a()) * inst.b();
    if let Ok(r) = greedy_round(inst, &ls) {
        let support = r.support();
        search.offer(r.x);
        search.offer_support(&support);
    }

    let mut root = Node::root(n);
    let (e0, e1) = (IndexSet::new(n), IndexSet::new(n));
    if let Some((x, value)) = search.relax(&e0, &e1) {
        root.lower = value.max(0.0);
        root.relaxation_z = indicators(inst, &x);
        let z = root.relaxation_z.clone();
        search.propose(&x, &z, &e0, &e1);
    } else {
        root.relaxation_z = DVector::from_element(n, 0.5);
    }
    if root.lower < search.prune_threshold() {
        search.pool.push(root);
    } else {
        search.pruned_floor = root.lower;
    }

    loop {
        let lb = search.global_lower();
        search.lower = lb;
        if search.pool.is_empty() || relative_gap(search.upper, lb) <= config.delta && config.delta > 0.0 {
            return Ok(search.finish(BnbStatus::OptimalWithinDelta, gamma0, warnings));
        }
        if let Some(t) = config.time_limit {
            if search.elapsed() >= t {
                return Ok(search.finish(BnbStatus::TimeLimit, gamma0, warnings));
            }
        }
        let node = search.pool.select_node()?;
        let i = select_branch_index(&node, &node.relaxation_z)?;
        search.nodes += 1;
        search.child(&node, node.i0.with(i), node.i1.clone(), true);
        search.child(&node, node.i0.clone(), node.i1.with(i), false);

        search.lower = search.global_lower();
        let progress = Progress {
            nodes: search.nodes,
            upper: search.upper,
            lower: search.lower,
            gap: relative_gap(search.upper, search.lower),
            elapsed: search.elapsed(),
            open_nodes: search.pool.len(),
            cuts: search.cuts.len(),
            incumbent: &search.incumbent,
        };
        if !observer(&progress) {
            return Ok(search.finish(BnbStatus::Interrupted, gamma0, warnings));
        }
    }
}
