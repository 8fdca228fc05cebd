//! Fine-grained pricing over task DAGs.
//!
//! A task is a DAG of subtasks; each subtask has a menu of deterministic
//! `(time, cost)` options. An assignment picks one option per subtask; its
//! completion time is the longest path through the graph and its cost is
//! the sum of the chosen costs. The agent wants the assignment maximizing
//! a profit function of `(total_time, total_cost)`.
//!
//! [`price_fine_grained_dp`] solves this with a pseudo-polynomial dynamic
//! program on a discretized time axis. A virtual terminal node with zero
//! time and cost, fed by every node, gives the table a single sink. The
//! state `f(node, t)` is the cheapest way to finish the subgraph ending at
//! `node` within budget `t`; each stored state carries the realizing
//! per-node choices so that overlapping predecessor subgraphs can be
//! merged with shared nodes counted once. When two subgraphs disagree on a
//! shared node's option, a [`CombineStrategy`] resolves it; the min-time
//! strategy always yields a feasible merge, and all three are run with the
//! best feasible profit kept. On trees no disagreement can arise and the
//! result is exactly optimal.
//!
//! Option times are rounded up to the grid before the DP runs, a
//! conservative bias. The final profit scan evaluates each stored state at
//! the true (unrounded) makespan of its realizing assignment, so profit
//! functions that are not monotone in time are handled coherently.

use std::collections::BTreeMap;
use std::rc::Rc;

use crate::error::{MarketError, Result};

/// Default cap on exhaustive-search assignment counts.
pub const DEFAULT_SEARCH_CAP: u64 = 10_000_000;

const UNSET: u16 = u16::MAX;

/// One deterministic configuration choice for a subtask.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NodeOption {
    /// Minutes. Zero is allowed (virtual or instantaneous steps).
    pub time: f64,
    /// Cents.
    pub cost: f64,
}

impl NodeOption {
    /// Collapses a stochastic configuration to its expectations: the DP
    /// plans on expected time and expected cost when options are backed by
    /// completion-time distributions.
    pub fn from_configuration(config: &crate::contract::Configuration) -> Self {
        let mean = config.histogram.mean();
        NodeOption { time: mean, cost: config.rate * mean }
    }
}

/// A subtask with its option menu.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskNode {
    pub id: String,
    pub options: Vec<NodeOption>,
}

impl TaskNode {
    pub fn new(id: impl Into<String>, options: Vec<NodeOption>) -> Self {
        TaskNode { id: id.into(), options }
    }
}

/// Directed acyclic graph of subtasks. Edges run producer to consumer.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph {
    names: Vec<String>,
    options: Vec<Vec<NodeOption>>,
    edges: Vec<(usize, usize)>,
    preds: Vec<Vec<usize>>,
}

impl TaskGraph {
    pub fn new(nodes: Vec<TaskNode>, edges: &[(String, String)]) -> Result<Self> {
        if nodes.is_empty() {
            return Err(MarketError::Empty("task graph nodes"));
        }
        let mut names = Vec::with_capacity(nodes.len());
        let mut options = Vec::with_capacity(nodes.len());
        for node in nodes {
            if names.contains(&node.id) {
                return Err(MarketError::Invalid(format!("duplicate node id {}", node.id)));
            }
            if node.options.is_empty() {
                return Err(MarketError::Empty("node option menu"));
            }
            if node.options.len() >= UNSET as usize {
                return Err(MarketError::Invalid("too many options on one node".into()));
            }
            for opt in &node.options {
                if !opt.time.is_finite() || !opt.cost.is_finite() || opt.time < 0.0 || opt.cost < 0.0
                {
                    return Err(MarketError::Invalid(format!(
                        "node {} has an option with negative or non-finite time/cost",
                        node.id
                    )));
                }
            }
            names.push(node.id);
            options.push(node.options);
        }
        let index_of = |id: &str| -> Result<usize> {
            names
                .iter()
                .position(|n| n == id)
                .ok_or_else(|| MarketError::UnknownId(id.to_string()))
        };
        let mut indexed = Vec::with_capacity(edges.len());
        for (from, to) in edges {
            let f = index_of(from)?;
            let t = index_of(to)?;
            if !indexed.contains(&(f, t)) {
                indexed.push((f, t));
            }
        }
        Self::from_indexed(names, options, indexed)
    }

    pub(crate) fn from_indexed(
        names: Vec<String>,
        options: Vec<Vec<NodeOption>>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = names.len();
        let mut preds = vec![Vec::new(); n];
        for &(f, t) in &edges {
            if f >= n || t >= n {
                return Err(MarketError::UnknownId(format!("node index {}", f.max(t))));
            }
            preds[t].push(f);
        }
        for p in &mut preds {
            p.sort_unstable();
        }
        let g = TaskGraph { names, options, edges, preds };
        g.topological_sort()?;
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn options(&self, node: usize) -> &[NodeOption] {
        &self.options[node]
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn predecessors(&self, node: usize) -> &[usize] {
        &self.preds[node]
    }

    /// Deterministic topological order: among ready nodes the
    /// lexicographically smallest id goes first. Reports an edge on a cycle.
    pub fn topological_sort(&self) -> Result<Vec<usize>> {
        let n = self.len();
        let mut indegree = vec![0usize; n];
        for &(_, t) in &self.edges {
            indegree[t] += 1;
        }
        let mut ready: Vec<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while !ready.is_empty() {
            let pick = ready
                .iter()
                .enumerate()
                .min_by(|(_, &a), (_, &b)| self.names[a].cmp(&self.names[b]))
                .map(|(i, _)| i)
                .unwrap();
            let v = ready.swap_remove(pick);
            order.push(v);
            for &(f, t) in &self.edges {
                if f == v {
                    indegree[t] -= 1;
                    if indegree[t] == 0 {
                        ready.push(t);
                    }
                }
            }
        }
        if order.len() != n {
            // Some edge inside the leftover set closes a cycle.
            let stuck: Vec<usize> = (0..n).filter(|&v| indegree[v] > 0).collect();
            let (f, t) = self
                .edges
                .iter()
                .find(|(f, t)| stuck.contains(f) && stuck.contains(t))
                .copied()
                .unwrap_or((stuck[0], stuck[0]));
            return Err(MarketError::Cycle {
                from: self.names[f].clone(),
                to: self.names[t].clone(),
            });
        }
        Ok(order)
    }

    /// Longest-path completion time of a full assignment, in minutes.
    pub fn total_time(&self, choices: &[usize]) -> f64 {
        let order = self.topological_sort().expect("validated graph");
        let mut finish = vec![0.0_f64; self.len()];
        let mut best: f64 = 0.0;
        for &v in &order {
            let mut start: f64 = 0.0;
            for &p in &self.preds[v] {
                start = start.max(finish[p]);
            }
            finish[v] = start + self.options[v][choices[v]].time;
            best = best.max(finish[v]);
        }
        best
    }

    pub fn total_cost(&self, choices: &[usize]) -> f64 {
        (0..self.len()).map(|v| self.options[v][choices[v]].cost).sum()
    }
}

/// A full per-node option assignment with its totals.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// Chosen option index per node.
    pub choices: Vec<usize>,
    /// Longest-path completion time, minutes.
    pub total_time: f64,
    /// Summed cost, cents.
    pub total_cost: f64,
    pub profit: f64,
}

/// How to resolve a disagreement about a shared node's option when two
/// predecessor subgraphs are merged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CombineStrategy {
    /// Keep the option with the smaller time. Never breaks feasibility.
    MinTime,
    /// Keep the option with the smaller cost.
    MinCost,
    /// Keep the option with the larger standalone profit.
    MaxProfit,
}

#[derive(Debug)]
struct Solution {
    cost: f64,
    makespan_minutes: f64,
    choices: Box<[u16]>,
}

type Column = Vec<(u32, Rc<Solution>)>;

struct Prepared {
    n: usize,
    topo: Vec<usize>,
    eff_preds: Vec<Vec<usize>>,
    time_units: Vec<Vec<u32>>,
    bound_t: u32,
    granularity: f64,
}

fn ceil_units(time: f64, granularity: f64) -> u32 {
    let units = (time / granularity - 1e-9).ceil();
    if units <= 0.0 {
        0
    } else {
        units as u32
    }
}

fn prepare(g: &TaskGraph, granularity: f64) -> Result<Prepared> {
    if !(granularity > 0.0) || !granularity.is_finite() {
        return Err(MarketError::Invalid(format!(
            "granularity {granularity} must be positive"
        )));
    }
    let n = g.len();
    let terminal = n;
    let mut order = g.topological_sort()?;
    order.push(terminal);

    // Predecessors including the terminal, which every node feeds.
    let mut preds: Vec<Vec<usize>> = (0..n).map(|v| g.preds[v].clone()).collect();
    preds.push((0..n).collect());

    // Ancestor bitsets, to drop predecessors dominated by another
    // predecessor: if p is an ancestor of q, the subgraph ending at q
    // already contains p's subgraph and finishes no earlier.
    let words = n.div_ceil(64);
    let mut ancestors = vec![vec![0u64; words]; n + 1];
    for &v in &order {
        let mut acc = vec![0u64; words];
        for &p in &preds[v] {
            for w in 0..words {
                acc[w] |= ancestors[p][w];
            }
            acc[p / 64] |= 1 << (p % 64);
        }
        ancestors[v] = acc;
    }
    let mut eff_preds = Vec::with_capacity(n + 1);
    for node_preds in &preds {
        let mut union = vec![0u64; words];
        for &p in node_preds {
            for w in 0..words {
                union[w] |= ancestors[p][w];
            }
        }
        let eff: Vec<usize> = node_preds
            .iter()
            .copied()
            .filter(|&p| union[p / 64] & (1 << (p % 64)) == 0)
            .collect();
        eff_preds.push(eff);
    }

    let mut time_units: Vec<Vec<u32>> = g
        .options
        .iter()
        .map(|opts| opts.iter().map(|o| ceil_units(o.time, granularity)).collect())
        .collect();
    time_units.push(vec![0]);

    // Safe horizon: every assignment's makespan fits under the sum of the
    // per-node worst option times.
    let bound_t: u64 = time_units[..n]
        .iter()
        .map(|units| units.iter().copied().max().unwrap_or(0) as u64)
        .sum::<u64>()
        .max(1);
    const MAX_HORIZON: u64 = 100_000_000;
    if bound_t > MAX_HORIZON {
        return Err(MarketError::Invalid(format!(
            "time horizon of {bound_t} grid steps exceeds {MAX_HORIZON}; use a coarser granularity"
        )));
    }

    Ok(Prepared { n, topo: order, eff_preds, time_units, bound_t: bound_t as u32, granularity })
}

/// The filled table of one strategy run.
pub struct DpTable {
    columns: Vec<Column>,
    bound_t: u32,
    granularity: f64,
    conflicts: bool,
    n: usize,
}

impl DpTable {
    /// Minimum cost of finishing the subgraph ending at `node` within
    /// `t_units` grid steps, if any assignment fits.
    pub fn cost(&self, node: usize, t_units: u32) -> Option<f64> {
        lookup(&self.columns[node], t_units).map(|s| s.cost)
    }

    pub fn bound_t(&self) -> u32 {
        self.bound_t
    }

    pub fn granularity(&self) -> f64 {
        self.granularity
    }

    /// Whether any merge had to resolve a shared-node disagreement. On
    /// trees this is always false and the table is exactly optimal.
    pub fn had_conflicts(&self) -> bool {
        self.conflicts
    }

    /// Scans the terminal column and returns the stored state with the
    /// greatest profit, evaluated at its true makespan. Earlier (smaller
    /// budget) states win ties.
    pub fn best_assignment<F: Fn(f64, f64) -> f64>(&self, profit: &F) -> Result<Assignment> {
        let terminal = &self.columns[self.n];
        let mut best: Option<(f64, &Rc<Solution>)> = None;
        for (_, sol) in terminal {
            let p = profit(sol.makespan_minutes, sol.cost);
            match &best {
                Some((cur, _)) if p <= *cur => {}
                _ => best = Some((p, sol)),
            }
        }
        let (p, sol) =
            best.ok_or_else(|| MarketError::Invalid("no feasible assignment".into()))?;
        Ok(Assignment {
            choices: sol.choices.iter().map(|&c| c as usize).collect(),
            total_time: sol.makespan_minutes,
            total_cost: sol.cost,
            profit: p,
        })
    }
}

fn lookup(column: &Column, t: u32) -> Option<&Rc<Solution>> {
    let idx = column.partition_point(|(cp, _)| *cp <= t);
    if idx == 0 {
        None
    } else {
        Some(&column[idx - 1].1)
    }
}

struct MergeScratch {
    finish_units: Vec<u32>,
    finish_minutes: Vec<f64>,
}

#[allow(clippy::too_many_arguments)]
fn merge_candidate<F: Fn(f64, f64) -> f64>(
    g: &TaskGraph,
    prep: &Prepared,
    columns: &[Column],
    node: usize,
    option: usize,
    t: u32,
    strategy: CombineStrategy,
    profit: &F,
    scratch: &mut MergeScratch,
    saw_conflict: &mut bool,
) -> Option<Solution> {
    let tu = prep.time_units[node][option];
    if tu > t {
        return None;
    }
    let budget = t - tu;
    let eff = &prep.eff_preds[node];
    let mut parts: Vec<&Rc<Solution>> = Vec::with_capacity(eff.len());
    for &q in eff {
        parts.push(lookup(&columns[q], budget)?);
    }

    let n = prep.n;
    let mut choices: Box<[u16]> = match parts.first() {
        Some(first) => first.choices.clone(),
        None => vec![UNSET; n].into_boxed_slice(),
    };
    let mut conflict = false;
    for part in parts.iter().skip(1) {
        for v in 0..n {
            let cv = part.choices[v];
            if cv == UNSET {
                continue;
            }
            if choices[v] == UNSET {
                choices[v] = cv;
            } else if choices[v] != cv {
                choices[v] = resolve(g, v, choices[v], cv, strategy, profit);
                conflict = true;
            }
        }
    }
    if node < n {
        choices[node] = option as u16;
    }
    if conflict {
        *saw_conflict = true;
    }

    // Cost and makespan of the merged assignment over its node set; the
    // terminal contributes nothing, interior nodes are covered by their
    // own choices entry.
    let mut cost = 0.0;
    for v in 0..n {
        if choices[v] != UNSET {
            cost += g.options[v][choices[v] as usize].cost;
        }
    }

    let finish_u = &mut scratch.finish_units;
    let finish_m = &mut scratch.finish_minutes;
    let mut mk_units: u32 = 0;
    let mut mk_minutes: f64 = 0.0;
    for &v in &prep.topo {
        if v == n {
            continue;
        }
        if choices[v] == UNSET {
            continue;
        }
        let mut start_u = 0u32;
        let mut start_m = 0.0f64;
        for &p in &g.preds[v] {
            if choices[p] != UNSET {
                start_u = start_u.max(finish_u[p]);
                start_m = start_m.max(finish_m[p]);
            }
        }
        finish_u[v] = start_u + prep.time_units[v][choices[v] as usize];
        finish_m[v] = start_m + g.options[v][choices[v] as usize].time;
        mk_units = mk_units.max(finish_u[v]);
        mk_minutes = mk_minutes.max(finish_m[v]);
    }
    if mk_units > t {
        return None;
    }
    Some(Solution { cost, makespan_minutes: mk_minutes, choices })
}

fn resolve<F: Fn(f64, f64) -> f64>(
    g: &TaskGraph,
    node: usize,
    a: u16,
    b: u16,
    strategy: CombineStrategy,
    profit: &F,
) -> u16 {
    let oa = g.options[node][a as usize];
    let ob = g.options[node][b as usize];
    let take_a = match strategy {
        CombineStrategy::MinTime => {
            (oa.time, oa.cost, a) <= (ob.time, ob.cost, b)
        }
        CombineStrategy::MinCost => {
            (oa.cost, oa.time, a) <= (ob.cost, ob.time, b)
        }
        CombineStrategy::MaxProfit => {
            let pa = profit(oa.time, oa.cost);
            let pb = profit(ob.time, ob.cost);
            pa > pb || (pa == pb && a <= b)
        }
    };
    if take_a {
        a
    } else {
        b
    }
}

/// Fills the dynamic-programming table for one discrepancy strategy.
pub fn fine_grained_table<F: Fn(f64, f64) -> f64>(
    g: &TaskGraph,
    profit: &F,
    granularity: f64,
    strategy: CombineStrategy,
) -> Result<DpTable> {
    let prep = prepare(g, granularity)?;
    let n = prep.n;
    let mut columns: Vec<Column> = vec![Vec::new(); n + 1];
    let mut scratch = MergeScratch {
        finish_units: vec![0; n],
        finish_minutes: vec![0.0; n],
    };
    let mut saw_conflict = false;

    for &node in &prep.topo.clone() {
        // Events: budgets where some predecessor column changes, shifted by
        // each option's rounded time; between events candidates are
        // unchanged, so only events need evaluation.
        // A zero-time option can finish at budget 0, so t = 0 is a valid
        // state exactly for subgraphs built entirely from zero-time
        // choices; nodes with only positive-time options keep an infinite
        // cost there, matching the table's base case.
        let mut events: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (o, &tu) in prep.time_units[node].iter().enumerate() {
            if prep.eff_preds[node].is_empty() {
                if tu <= prep.bound_t {
                    events.entry(tu).or_default().push(o);
                }
            } else {
                for &q in &prep.eff_preds[node] {
                    for &(cp, _) in &columns[q] {
                        let e = cp.saturating_add(tu);
                        if e <= prep.bound_t {
                            events.entry(e).or_default().push(o);
                        }
                    }
                }
            }
        }
        let mut best: Option<Rc<Solution>> = None;
        for (&t, opts) in &events {
            let mut improved = false;
            let mut seen: Vec<usize> = Vec::with_capacity(opts.len());
            for &o in opts {
                if seen.contains(&o) {
                    continue;
                }
                seen.push(o);
                if let Some(cand) = merge_candidate(
                    g,
                    &prep,
                    &columns,
                    node,
                    o,
                    t,
                    strategy,
                    profit,
                    &mut scratch,
                    &mut saw_conflict,
                ) {
                    let better = match &best {
                        None => true,
                        Some(cur) => cand.cost < cur.cost,
                    };
                    if better {
                        best = Some(Rc::new(cand));
                        improved = true;
                    }
                }
            }
            if improved {
                columns[node].push((t, best.clone().unwrap()));
            }
        }
    }

    Ok(DpTable {
        columns,
        bound_t: prep.bound_t,
        granularity: prep.granularity,
        conflicts: saw_conflict,
        n,
    })
}

/// Prices a task graph with the dynamic program. Runs the min-time
/// strategy first; if any merge hit a disagreement (only possible on
/// non-tree DAGs) the other two strategies run as well and the best
/// feasible profit wins. Exact on trees.
pub fn price_fine_grained_dp<F: Fn(f64, f64) -> f64>(
    g: &TaskGraph,
    profit: F,
    granularity: f64,
) -> Result<Assignment> {
    let table = fine_grained_table(g, &profit, granularity, CombineStrategy::MinTime)?;
    let mut best = table.best_assignment(&profit)?;
    if table.had_conflicts() {
        for strategy in [CombineStrategy::MinCost, CombineStrategy::MaxProfit] {
            let table = fine_grained_table(g, &profit, granularity, strategy)?;
            let candidate = table.best_assignment(&profit)?;
            if candidate.profit > best.profit {
                best = candidate;
            }
        }
    }
    Ok(best)
}

/// Greedy baseline: per node, the option with the best standalone profit.
pub fn price_greedy<F: Fn(f64, f64) -> f64>(g: &TaskGraph, profit: F) -> Assignment {
    let choices: Vec<usize> = (0..g.len())
        .map(|v| {
            let mut best = 0;
            let mut best_profit = f64::NEG_INFINITY;
            for (o, opt) in g.options[v].iter().enumerate() {
                let p = profit(opt.time, opt.cost);
                if p > best_profit {
                    best_profit = p;
                    best = o;
                }
            }
            best
        })
        .collect();
    let total_time = g.total_time(&choices);
    let total_cost = g.total_cost(&choices);
    let p = profit(total_time, total_cost);
    Assignment { choices, total_time, total_cost, profit: p }
}

/// Exhaustive baseline: the true optimum, for search spaces under `cap`.
pub fn price_exhaustive<F: Fn(f64, f64) -> f64>(
    g: &TaskGraph,
    profit: F,
    cap: u64,
) -> Result<Assignment> {
    let combinations: f64 = g.options.iter().map(|o| o.len() as f64).product();
    if combinations > cap as f64 {
        return Err(MarketError::CapExceeded { combinations, cap: cap as f64 });
    }
    let n = g.len();
    let order = g.topological_sort()?;
    let mut choices = vec![0usize; n];
    let mut finish = vec![0.0f64; n];
    let mut best: Option<Assignment> = None;
    loop {
        let mut total_cost = 0.0;
        let mut total_time: f64 = 0.0;
        for &v in &order {
            let mut start: f64 = 0.0;
            for &p in &g.preds[v] {
                start = start.max(finish[p]);
            }
            finish[v] = start + g.options[v][choices[v]].time;
            total_time = total_time.max(finish[v]);
            total_cost += g.options[v][choices[v]].cost;
        }
        let p = profit(total_time, total_cost);
        let better = match &best {
            None => true,
            Some(cur) => p > cur.profit,
        };
        if better {
            best = Some(Assignment {
                choices: choices.clone(),
                total_time,
                total_cost,
                profit: p,
            });
        }
        // Odometer step.
        let mut k = 0;
        loop {
            if k == n {
                return Ok(best.expect("at least one assignment"));
            }
            choices[k] += 1;
            if choices[k] < g.options[k].len() {
                break;
            }
            choices[k] = 0;
            k += 1;
        }
    }
}

/// Encodes a 0-1 knapsack instance as a chain-shaped pricing problem.
///
/// Item `i` becomes a subtask with options `(w_i, v0 - v_i)` (take it) and
/// `(0, v0)` (skip it), where `v0` is the largest value. The profit of an
/// assignment with total time `T` and cost `C` is `n*v0 - C` when
/// `T <= capacity` and zero otherwise, which equals the packed value.
pub fn knapsack_to_graph(
    items: &[(f64, f64)],
    capacity: f64,
) -> Result<(TaskGraph, impl Fn(f64, f64) -> f64)> {
    if items.is_empty() {
        return Err(MarketError::Empty("knapsack items"));
    }
    for &(w, v) in items {
        if !(w > 0.0) || !(v > 0.0) || !w.is_finite() || !v.is_finite() {
            return Err(MarketError::Invalid(format!(
                "knapsack items need positive weight and value, got ({w}, {v})"
            )));
        }
    }
    if !(capacity >= 0.0) {
        return Err(MarketError::Invalid(format!("capacity {capacity} must be nonnegative")));
    }
    let v0 = items.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    let nodes: Vec<TaskNode> = items
        .iter()
        .enumerate()
        .map(|(i, &(w, v))| {
            TaskNode::new(
                format!("item{i:03}"),
                vec![NodeOption { time: w, cost: v0 - v }, NodeOption { time: 0.0, cost: v0 }],
            )
        })
        .collect();
    let edges: Vec<(String, String)> =
        (1..items.len()).map(|i| (format!("item{:03}", i - 1), format!("item{i:03}"))).collect();
    let graph = TaskGraph::new(nodes, &edges)?;
    let n = items.len() as f64;
    let profit = move |t: f64, c: f64| {
        if t <= capacity + 1e-9 {
            n * v0 - c
        } else {
            0.0
        }
    };
    Ok((graph, profit))
}
