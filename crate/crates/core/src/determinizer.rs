//! Deterministic periodic schedules: evaluation of generating cycles and
//! sampling them out of long random walks of an RFM strategy.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AugmentedGraph;
use crate::model::ServiceSpec;
use crate::strategy::RfmStrategy;

/// Mean payoff of the periodic schedule generated by
/// `nodes[a], times[a], ..., nodes[b-1], times[b-1], nodes[b]`.
///
/// `nodes` are base nodes; `nodes[a] == nodes[b]` is required.
pub fn eval_schedule(spec: &ServiceSpec, nodes: &[usize], times: &[u64], a: usize, b: usize) -> Result<f64> {
    check_window(spec, nodes, times, a, b)?;
    let n = spec.node_count();
    let mut first: Vec<Option<u64>> = vec![None; n];
    let mut last: Vec<Option<u64>> = vec![None; n];
    let mut cost = 0.0;
    let mut length = 0u64;
    for i in a..b {
        let u = nodes[i];
        match last[u] {
            None => first[u] = Some(length),
            Some(l) => cost += spec.payoffs[u].value(length - l),
        }
        last[u] = Some(length);
        length += times[i];
    }
    let mut penalty = 0.0;
    for u in 0..n {
        match (first[u], last[u]) {
            (Some(f), Some(l)) => cost += spec.payoffs[u].value(length + f - l),
            _ => penalty += spec.payoffs[u].c,
        }
    }
    Ok(penalty + cost / length as f64)
}

fn check_window(spec: &ServiceSpec, nodes: &[usize], times: &[u64], a: usize, b: usize) -> Result<()> {
    if b <= a {
        return Err(Error::invalid(format!("empty cycle window [{a}, {b}]")));
    }
    if b >= nodes.len() || times.len() < b {
        return Err(Error::invalid(format!("cycle window [{a}, {b}] exceeds the walk")));
    }
    if let Some(&u) = nodes[a..=b].iter().find(|&&u| u >= spec.node_count()) {
        return Err(Error::NodeOutOfRange(u));
    }
    if nodes[a] != nodes[b] {
        return Err(Error::invalid("generating cycle must start and end at the same node"));
    }
    if times[a..b].iter().any(|&t| t == 0) {
        return Err(Error::invalid("cycle contains a zero-time move"));
    }
    Ok(())
}

/// Payoff functions flattened for the sampling hot loop. Node `u` owns
/// `values[start..start + k]` holding `P(1), ..., P(k - 1), d`.
#[derive(Clone, Debug)]
struct PayoffTable {
    heads: Vec<Head>,
    values: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Head {
    k: u64,
    c: f64,
    start: usize,
}

impl PayoffTable {
    fn new(spec: &ServiceSpec) -> Self {
        let mut heads = Vec::with_capacity(spec.node_count());
        let mut values = Vec::new();
        for p in &spec.payoffs {
            heads.push(Head {
                k: p.k,
                c: p.c,
                start: values.len(),
            });
            values.extend_from_slice(&p.prefix);
            values.push(p.d);
        }
        Self { heads, values }
    }

    #[inline(always)]
    fn at(&self, u: usize, t: u64) -> f64 {
        let h = self.heads[u];
        let i = t.min(h.k);
        self.values[h.start + (i - 1) as usize] + (t - i) as f64 * h.c
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Visit {
    stamp: u32,
    /// Offset (time to `b`) of the earliest and latest visit in the window.
    first: u64,
    last: u64,
}

/// Evaluation state of a window `[a, b]` that grows to the left one index at
/// a time. Offsets are measured backwards from `b`, so extending the window
/// leaves all stored offsets valid.
#[derive(Clone, Debug)]
pub struct IncrementalEval {
    a: usize,
    b: usize,
    /// Time from `a` to `b`.
    elapsed: u64,
    internal: f64,
    visits: Vec<Visit>,
    /// Nodes visited in the current window, in first-touch order.
    touched: Vec<usize>,
    touched_c: f64,
    total_c: f64,
    epoch: u32,
    table: PayoffTable,
}

impl IncrementalEval {
    pub fn new(spec: &ServiceSpec, b: usize) -> Self {
        Self {
            a: b,
            b,
            elapsed: 0,
            internal: 0.0,
            visits: vec![Visit::default(); spec.node_count()],
            touched: Vec::with_capacity(spec.node_count()),
            touched_c: 0.0,
            total_c: spec.payoffs.iter().map(|p| p.c).sum(),
            epoch: 1,
            table: PayoffTable::new(spec),
        }
    }

    /// Restarts with the empty window at `b`.
    pub fn reset(&mut self, b: usize) {
        self.a = b;
        self.b = b;
        self.elapsed = 0;
        self.internal = 0.0;
        self.touched.clear();
        self.touched_c = 0.0;
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.visits.iter_mut().for_each(|v| v.stamp = 0);
            self.epoch = 1;
        }
    }

    pub fn window(&self) -> (usize, usize) {
        (self.a, self.b)
    }

    /// Adds index `a - 1`, visiting base node `u` and then moving for `tau`.
    #[inline(always)]
    pub fn prepend(&mut self, u: usize, tau: u64) {
        self.a -= 1;
        self.elapsed += tau;
        let e = self.elapsed;
        let epoch = self.epoch;
        let v = &mut self.visits[u];
        if v.stamp == epoch {
            let gap = e - v.first;
            v.first = e;
            self.internal += self.table.at(u, gap);
        } else {
            *v = Visit {
                stamp: epoch,
                first: e,
                last: e,
            };
            self.touched.push(u);
            self.touched_c += self.table.heads[u].c;
        }
    }

    /// Value of the current window as a generating cycle.
    #[inline(always)]
    pub fn value(&self) -> f64 {
        let length = self.elapsed;
        let mut wraps = 0.0;
        for &u in &self.touched {
            let v = self.visits[u];
            wraps += self.table.at(u, length - (v.first - v.last));
        }
        (self.total_c - self.touched_c) + (self.internal + wraps) / length as f64
    }
}

/// Extends the cached evaluation of `[a, b]` to `[a_new, b]`.
pub fn eval_schedule_incremental(
    spec: &ServiceSpec,
    nodes: &[usize],
    times: &[u64],
    a_new: usize,
    a: usize,
    b: usize,
    cached: &mut IncrementalEval,
) -> Result<f64> {
    if cached.window() != (a, b) {
        return Err(Error::invalid(format!(
            "cache holds window {:?}, not ({a}, {b})",
            cached.window()
        )));
    }
    if a_new > a {
        return Err(Error::invalid("incremental evaluation only extends to the left"));
    }
    check_window(spec, nodes, times, a_new, b)?;
    for i in (a_new..a).rev() {
        cached.prepend(nodes[i], times[i]);
    }
    Ok(cached.value())
}

/// A generating cycle together with its value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodicSchedule {
    /// Base nodes, first equal to last.
    pub base_nodes: Vec<usize>,
    /// Memory state of each visited augmented node.
    pub memory: Vec<usize>,
    /// Traverse time of each move, waits included.
    pub times: Vec<u64>,
    pub value: f64,
    /// Number of vertices, `b - a`.
    pub length: usize,
    pub total_time: u64,
    /// Instance metadata used to group schedules.
    #[serde(default)]
    pub instance: BTreeMap<String, serde_json::Value>,
}

impl PeriodicSchedule {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        crate::instances::parse_with_path(text)
    }

    /// Re-evaluates the cycle from scratch.
    pub fn evaluate(&self, spec: &ServiceSpec) -> Result<f64> {
        eval_schedule(spec, &self.base_nodes, &self.times, 0, self.length)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SampleConfig {
    /// Walk length `s`.
    pub samples: usize,
    /// Longest generating cycle `l`, in vertices.
    pub max_cycle: usize,
    /// Initial standard augmented node; the depot with memory 0 if unset.
    pub start: Option<usize>,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            samples: 100_000,
            max_cycle: 300,
            start: None,
        }
    }
}

/// Default walk origin: the depot (or node 0) in memory state 0.
pub fn default_start(spec: &ServiceSpec, graph: &AugmentedGraph) -> usize {
    graph.standard_id(spec.depot().unwrap_or(0), 0)
}

/// Walks `s + 1` steps of the strategy and returns the best generating cycle
/// of at most `l` vertices between two visits of the same augmented node.
/// Ties keep the earliest candidate.
pub fn sample_periodic_schedule<R: Rng>(
    strategy: &RfmStrategy,
    graph: &AugmentedGraph,
    spec: &ServiceSpec,
    config: &SampleConfig,
    rng: &mut R,
) -> Result<PeriodicSchedule> {
    if config.samples == 0 || config.max_cycle == 0 {
        return Err(Error::invalid("sample length and cycle bound must be at least 1"));
    }
    if graph.base_count() != spec.node_count() {
        return Err(Error::Mismatch("graph and specification differ in node count".into()));
    }
    let start = config.start.unwrap_or_else(|| default_start(spec, graph));
    if !graph.is_standard(start) {
        return Err(if start < graph.node_count() {
            Error::WaitVertex(start)
        } else {
            Error::NodeOutOfRange(start)
        });
    }
    let s = config.samples;
    let mut walk = Vec::with_capacity(s + 2);
    let mut base = Vec::with_capacity(s + 2);
    let mut tau = Vec::with_capacity(s + 1);
    walk.push(start);
    base.push(graph.base_of(start));
    for i in 0..=s {
        let (next, delta) = strategy.get_random_successor(graph, walk[i], rng)?;
        let nb = graph.base_of(next);
        tau.push(spec.time(base[i], nb) + delta);
        walk.push(next);
        base.push(nb);
    }
    let (a, b, best) =
        best_window(spec, graph.standard_count(), &walk, &base, &tau, config.max_cycle).ok_or(Error::NoCycleFound)?;
    Ok(PeriodicSchedule {
        base_nodes: base[a..=b].to_vec(),
        memory: walk[a..=b].iter().map(|&v| v % graph.memory_size()).collect(),
        times: tau[a..b].to_vec(),
        value: best,
        length: b - a,
        total_time: tau[a..b].iter().sum(),
        instance: spec
            .meta
            .iter()
            .filter(|(k, _)| matches!(k.as_str(), "family" | "k" | "seed"))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
    })
}

/// Scans a walk as the sampler does: for every index `b`, each earlier index
/// `a` with `walk[a] == walk[b]` and `b - a <= max_cycle` is a candidate
/// cycle. Returns the first window of strictly greatest value.
///
/// The payoff at the next visit of each position's node is computed once per
/// walk. A window's value is then the sum of those payoffs over its positions,
/// except that the last visit of every node other than `base[b]` wraps around
/// to the node's first visit. Prefix sums give a cheap upper bound per
/// candidate; only candidates that may beat the current best are evaluated,
/// and the exact evaluation walks back no further than the farthest of them.
fn best_window(
    spec: &ServiceSpec,
    augmented: usize,
    walk: &[usize],
    base: &[usize],
    tau: &[u64],
    max_cycle: usize,
) -> Option<(usize, usize, f64)> {
    let table = PayoffTable::new(spec);
    let n = spec.node_count();
    let len = walk.len();
    let c: Vec<f64> = spec.payoffs.iter().map(|p| p.c).collect();
    let total_c: f64 = c.iter().sum();
    let cap: Vec<f64> = spec.payoffs.iter().map(max_payoff).collect();

    let mut clock = Vec::with_capacity(len);
    clock.push(0u64);
    for &t in tau {
        clock.push(clock.last().unwrap() + t);
    }
    // gap[p]: payoff at the next visit of base[p] (zero if there is none)
    let mut gap = vec![0.0; len];
    let mut last: Vec<Option<usize>> = vec![None; n];
    for (p, &u) in base.iter().enumerate() {
        if let Some(q) = last[u] {
            gap[q] = table.at(u, clock[p] - clock[q]);
        }
        last[u] = Some(p);
    }
    let mut prefix = Vec::with_capacity(len + 1);
    let mut prefix_abs = Vec::with_capacity(len + 1);
    prefix.push(0.0);
    prefix_abs.push(0.0);
    for &g in &gap {
        prefix.push(prefix.last().unwrap() + g);
        prefix_abs.push(prefix_abs.last().unwrap() + g.abs());
    }

    last.iter_mut().for_each(|l| *l = None);
    let mut visits: Vec<Vec<usize>> = vec![Vec::new(); augmented];
    let mut stamp = vec![0usize; n];
    let mut first_clock = vec![0u64; n];
    let mut others: Vec<usize> = Vec::with_capacity(n);
    // penalties other nodes could add at most
    let penalty_cap: Vec<f64> = (0..n)
        .map(|u| (0..n).filter(|&w| w != u).map(|w| c[w].max(0.0)).sum())
        .collect();

    // Per augmented node, a sliding-window minimum of
    // h(a) = prefix[a] - threshold * clock[a] over its candidate positions;
    // rebuilt whenever the best value (and so the threshold) changes.
    let mut windows: Vec<VecDeque<usize>> = vec![VecDeque::new(); augmented];
    let mut built = vec![0u64; augmented];
    let mut version = 1u64;
    let threshold_of = |best: f64, u: usize| best - 1e-9 * (1.0 + best.abs()) - penalty_cap[u];

    let mut best = f64::NEG_INFINITY;
    let mut found = None;
    for b in 0..len {
        let nb = base[b];
        let v = walk[b];
        let seen = &visits[v];
        let earliest = seen.partition_point(|&x| x + max_cycle < b);
        let threshold = threshold_of(best, nb);
        let h = |a: usize| prefix[a] - threshold * clock[a] as f64;
        if earliest < seen.len() {
            // Bound on everything the prefix sums get wrong: the open visits
            // of other nodes, whose gaps are replaced by wrap payoffs.
            let mut slack = 0.0;
            for u in (0..n).filter(|&u| u != nb) {
                if let Some(l) = last[u] {
                    // a touched node trades its open gap for a wrap
                    slack += (cap[u] - gap[l]).max(0.0);
                }
            }
            // rounding of the prefix sums and of the rearranged comparison
            slack += 2.0 * b as f64 * f64::EPSILON * prefix_abs[b];
            let mut skip = false;
            if best.is_finite() {
                slack += 8.0 * f64::EPSILON * (prefix_abs[b] + threshold.abs() * clock[b] as f64);
                let window = &mut windows[v];
                if built[v] != version {
                    window.clear();
                    for &a in &seen[earliest..] {
                        while window.back().is_some_and(|&x| h(x) >= h(a)) {
                            window.pop_back();
                        }
                        window.push_back(a);
                    }
                    built[v] = version;
                } else {
                    while window.front().is_some_and(|&x| x + max_cycle < b) {
                        window.pop_front();
                    }
                }
                let lowest = h(*window.front().expect("window holds the candidates"));
                skip = prefix[b] + slack - threshold * (clock[b] as f64) < lowest;
            }
            let reach = if skip {
                None
            } else {
                seen[earliest..].iter().position(|&a| {
                    let length = (clock[b] - clock[a]) as f64;
                    prefix[b] - prefix[a] + slack >= threshold * length
                })
            };
            if let Some(reach) = reach {
                let epoch = b + 1;
                stamp[nb] = epoch;
                others.clear();
                let mut acc = 0.0;
                let mut touched_c = c[nb];
                let mut wrap_cap = 0.0;
                let mut a = b;
                for &stop in seen[earliest + reach..].iter().rev() {
                    while a > stop {
                        a -= 1;
                        let u = base[a];
                        if stamp[u] != epoch {
                            stamp[u] = epoch;
                            if u != nb {
                                others.push(u);
                            }
                            touched_c += c[u];
                            wrap_cap += cap[u];
                        }
                        // the open visit of another node wraps instead
                        if u == nb || last[u] != Some(a) {
                            acc += gap[a];
                        }
                        first_clock[u] = clock[a];
                    }
                    let length = clock[b] - clock[a];
                    let penalty = total_c - touched_c;
                    let floor = best - 1e-9 * (1.0 + best.abs());
                    if acc + wrap_cap < (floor - penalty) * length as f64 {
                        continue;
                    }
                    let mut wraps = 0.0;
                    for &u in &others {
                        let l = last[u].expect("touched nodes have a visit before b");
                        wraps += table.at(u, length - (clock[l] - first_clock[u]));
                    }
                    let value = penalty + (acc + wraps) / length as f64;
                    if value > best {
                        best = value;
                        found = Some((a, b));
                        version += 1;
                    }
                }
            }
        }
        last[nb] = Some(b);
        visits[v].push(b);
        if built[v] == version {
            let threshold = threshold_of(best, nb);
            let h = |a: usize| prefix[a] - threshold * clock[a] as f64;
            let window = &mut windows[v];
            while window.back().is_some_and(|&x| h(x) >= h(b)) {
                window.pop_back();
            }
            window.push_back(b);
        }
    }
    found.map(|(a, b)| (a, b, best))
}

/// Largest value a payoff function takes; unbounded when it grows.
fn max_payoff(p: &crate::model::PayoffFunction) -> f64 {
    if p.c > 0.0 {
        return f64::INFINITY;
    }
    p.prefix.iter().copied().fold(p.d, f64::max)
}

/// Projects a standard augmented node to its base node.
pub fn deaugmentify(graph: &AugmentedGraph, id: usize) -> Result<usize> {
    graph.deaugmentify(id)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleStats {
    pub group: String,
    pub count: usize,
    pub length_mean: f64,
    pub length_std: f64,
    pub time_mean: f64,
    pub time_std: f64,
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn group_key(s: &PeriodicSchedule) -> String {
    let family = s.instance.get("family").and_then(|v| v.as_str()).unwrap_or("unknown");
    match s.instance.get("k") {
        Some(k) => format!("{family} k={k}"),
        None => family.to_string(),
    }
}

/// Length and total-time statistics per instance group.
pub fn schedule_stats(schedules: &[PeriodicSchedule]) -> Result<Vec<ScheduleStats>> {
    if schedules.is_empty() {
        return Err(Error::invalid("no schedules to summarize"));
    }
    let mut groups: BTreeMap<String, Vec<&PeriodicSchedule>> = BTreeMap::new();
    for s in schedules {
        groups.entry(group_key(s)).or_default().push(s);
    }
    Ok(groups
        .into_iter()
        .map(|(group, members)| {
            let lengths: Vec<f64> = members.iter().map(|s| s.length as f64).collect();
            let times: Vec<f64> = members.iter().map(|s| s.total_time as f64).collect();
            let (length_mean, length_std) = mean_std(&lengths);
            let (time_mean, time_std) = mean_std(&times);
            ScheduleStats {
                group,
                count: members.len(),
                length_mean,
                length_std,
                time_mean,
                time_std,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluator::strategy_value;
    use crate::graph::WAIT_EXIT_SLOT;
    use crate::instances::{self, GridOptions};
    use crate::model::{PayoffFunction, Prolongable};
    use crate::rng;
    use proptest::prelude::*;

    fn fig1_cycle() -> (Vec<usize>, Vec<u64>) {
        let mut nodes = vec![0; 9];
        nodes.extend([1, 0]);
        (nodes, vec![1; 10])
    }

    #[test]
    fn fig1_cycles() {
        let spec = instances::fig1_instance();
        let (nodes, times) = fig1_cycle();
        assert!((eval_schedule(&spec, &nodes, &times, 0, 10).unwrap() - 1.9).abs() < 1e-12);
        assert_eq!(eval_schedule(&spec, &[0, 0], &[1], 0, 1).unwrap(), 1.0);
        // |M| = 2 cycle v,1,v,8,u,1
        let v = eval_schedule(&spec, &[0, 0, 1, 0], &[1, 8, 1], 0, 3).unwrap();
        assert!((v - 1.2).abs() < 1e-12);
    }

    #[test]
    fn window_errors() {
        let spec = instances::fig1_instance();
        assert!(eval_schedule(&spec, &[0, 1], &[1], 0, 1).is_err());
        assert!(eval_schedule(&spec, &[0, 0], &[1], 1, 1).is_err());
        assert!(eval_schedule(&spec, &[0, 0], &[0], 0, 1).is_err());
        assert!(eval_schedule(&spec, &[0, 0], &[1], 0, 2).is_err());
    }

    #[test]
    fn unvisited_compulsory_penalty() {
        let mut spec = instances::fig1_instance();
        spec.payoffs[1] = PayoffFunction::new(vec![0.0; 9], 10.0, -5.0);
        spec.compulsory[1] = true;
        assert_eq!(eval_schedule(&spec, &[0, 0], &[1], 0, 1).unwrap(), 1.0 - 5.0);
    }

    #[test]
    fn single_visit_wraps_full_period() {
        let spec = instances::fig1_instance();
        // u visited once in a period of 12
        let v = eval_schedule(&spec, &[1, 0, 0, 1], &[1, 1, 10], 0, 3).unwrap();
        let expected = (10.0 + 1.0 + 1.0) / 12.0;
        // v: gaps 1 and 11 each pay 1; u: gap 12 pays 10
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn incremental_cache_contract() {
        let spec = instances::fig1_instance();
        let (nodes, times) = fig1_cycle();
        let mut inc = IncrementalEval::new(&spec, 10);
        assert!(eval_schedule_incremental(&spec, &nodes, &times, 0, 8, 10, &mut inc).is_err());
        assert!(eval_schedule_incremental(&spec, &nodes, &times, 9, 10, 10, &mut inc).is_err());
        let v = eval_schedule_incremental(&spec, &nodes, &times, 8, 10, 10, &mut inc).unwrap();
        assert_eq!(v, eval_schedule(&spec, &nodes, &times, 8, 10).unwrap());
        assert_eq!(v, 0.5);
        let v0 = eval_schedule_incremental(&spec, &nodes, &times, 0, 8, 10, &mut inc).unwrap();
        assert!((v0 - 1.9).abs() < 1e-12);
        assert_eq!(eval_schedule_incremental(&spec, &nodes, &times, 0, 0, 10, &mut inc).unwrap(), v0);
        assert!(eval_schedule_incremental(&spec, &nodes, &times, 1, 0, 10, &mut inc).is_err());
    }

    /// Hard-coded Fig. 1 optimum: from v loop on v eight times, then u.
    fn fig1_cycle_strategy(g: &AugmentedGraph, memory: usize) -> RfmStrategy {
        let mut probs = vec![0.0; g.edge_count()];
        for id in 0..g.node_count() {
            let r = g.edge_range(id);
            if !g.is_standard(id) {
                probs[r.start + WAIT_EXIT_SLOT] = 1.0;
                continue;
            }
            let (node, m) = (g.base_of(id), id % memory);
            let target = if node == 1 {
                g.standard_id(0, 0)
            } else if m + 1 < memory {
                g.standard_id(0, m + 1)
            } else {
                g.standard_id(1, 0)
            };
            let slot = r
                .clone()
                .find(|&s| match g.node(g.edge(s).target).unwrap() {
                    crate::graph::AugmentedNode::Wait { to, .. } => to == target,
                    _ => g.edge(s).target == target,
                })
                .unwrap();
            probs[slot] = 1.0;
        }
        RfmStrategy::from_probs(g, probs).unwrap()
    }

    #[test]
    fn recovers_hard_coded_cycle() {
        let spec = instances::fig1_instance();
        let g = AugmentedGraph::build(&spec, 9).unwrap();
        let s = fig1_cycle_strategy(&g, 9);
        let cfg = SampleConfig { samples: 200, max_cycle: 20, start: None };
        let sched = sample_periodic_schedule(&s, &g, &spec, &cfg, &mut rng::stream(1, &[])).unwrap();
        assert!((sched.value - 1.9).abs() < 1e-12);
        assert_eq!(sched.length, 10);
        assert_eq!(sched.total_time, 10);
        assert!((sched.evaluate(&spec).unwrap() - sched.value).abs() < 1e-12);
        assert!((strategy_value(&s, &g, &spec).unwrap().value - 1.9).abs() < 1e-12);
    }

    #[test]
    fn short_walk_finds_no_cycle() {
        let spec = instances::fig1_instance();
        let g = AugmentedGraph::build(&spec, 9).unwrap();
        let s = fig1_cycle_strategy(&g, 9);
        let cfg = SampleConfig { samples: 5, max_cycle: 20, start: None };
        assert!(matches!(
            sample_periodic_schedule(&s, &g, &spec, &cfg, &mut rng::stream(1, &[])),
            Err(Error::NoCycleFound)
        ));
    }

    #[test]
    fn length_one_cycles_only() {
        let spec = instances::fig1_instance();
        let g = AugmentedGraph::build(&spec, 1).unwrap();
        let s = RfmStrategy::from_params(&crate::strategy::StrategyParams::zeros(&g), &g).unwrap();
        let cfg = SampleConfig { samples: 2000, max_cycle: 1, start: None };
        let sched = sample_periodic_schedule(&s, &g, &spec, &cfg, &mut rng::stream(3, &[])).unwrap();
        assert_eq!(sched.length, 1);
        assert_eq!(sched.base_nodes, vec![0, 0]);
        assert_eq!(sched.value, 1.0);
    }

    #[test]
    fn sampled_schedules_satisfy_invariants() {
        let spec = instances::generate_grid_instance(1, 4, &GridOptions::default()).unwrap();
        let g = AugmentedGraph::build(&spec, 2).unwrap();
        let p = crate::strategy::StrategyParams::init_seeded(&g, Default::default(), 9).unwrap();
        let s = RfmStrategy::from_params(&p, &g).unwrap();
        let cfg = SampleConfig { samples: 3000, max_cycle: 60, start: None };
        let sched = sample_periodic_schedule(&s, &g, &spec, &cfg, &mut rng::stream(5, &[])).unwrap();
        assert_eq!(sched.base_nodes.first(), sched.base_nodes.last());
        assert_eq!(sched.memory.first(), sched.memory.last());
        for i in 0..sched.length {
            let (u, v) = (sched.base_nodes[i], sched.base_nodes[i + 1]);
            assert!(sched.times[i] >= spec.time(u, v));
        }
        assert_eq!(sched.value, sched.evaluate(&spec).unwrap());
        let back = PeriodicSchedule::from_json(&sched.to_json().unwrap()).unwrap();
        assert_eq!(back, sched);
    }

    #[test]
    fn waits_only_on_prolongable_pairs() {
        let spec = ServiceSpec::new(
            vec!["a".into(), "b".into()],
            vec![vec![1, 2], vec![2, 1]],
            vec![PayoffFunction::new(vec![0.0, 0.0, 3.0], 3.0, 0.0); 2],
            Prolongable::Pairs(vec![(0, 1)]),
            vec![false; 2],
        )
        .unwrap();
        let g = AugmentedGraph::build(&spec, 1).unwrap();
        let s = RfmStrategy::from_params(&crate::strategy::StrategyParams::zeros(&g), &g).unwrap();
        let cfg = SampleConfig { samples: 5000, max_cycle: 30, start: None };
        let sched = sample_periodic_schedule(&s, &g, &spec, &cfg, &mut rng::stream(2, &[])).unwrap();
        for i in 0..sched.length {
            let (u, v) = (sched.base_nodes[i], sched.base_nodes[i + 1]);
            if !spec.is_prolongable(u, v) {
                assert_eq!(sched.times[i], spec.time(u, v));
            }
        }
    }

    #[test]
    fn stats_population_convention() {
        let mk = |length, total_time| PeriodicSchedule {
            base_nodes: vec![],
            memory: vec![],
            times: vec![],
            value: 0.0,
            length,
            total_time,
            instance: [("family".to_string(), serde_json::json!("grid")), ("k".to_string(), serde_json::json!(2))].into(),
        };
        let st = schedule_stats(&[mk(140, 6000), mk(160, 6004)]).unwrap();
        assert_eq!(st.len(), 1);
        assert_eq!((st[0].length_mean, st[0].length_std), (150.0, 10.0));
        assert_eq!((st[0].time_mean, st[0].time_std), (6002.0, 2.0));
        let one = schedule_stats(&[mk(7, 70)]).unwrap();
        assert_eq!(one[0].length_std, 0.0);
        assert!(schedule_stats(&[]).is_err());
    }

    fn random_cycle() -> impl Strategy<Value = (Vec<usize>, Vec<u64>)> {
        (2usize..12).prop_flat_map(|len| {
            (prop::collection::vec(0usize..3, len), prop::collection::vec(1u64..6, len))
        })
    }

    fn three_node_spec() -> ServiceSpec {
        ServiceSpec::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![1; 3]; 3],
            vec![
                PayoffFunction::new(vec![0.0, 1.0, 4.0, 2.0], 2.0, -0.5),
                PayoffFunction::new(vec![3.0, 0.0], 1.0, 0.0),
                PayoffFunction::new(vec![0.0; 6], 7.0, -1.0),
            ],
            Prolongable::All,
            vec![true, false, true],
        )
        .unwrap()
    }

    proptest! {
        #[test]
        fn rotation_invariance((mut cyc, times) in random_cycle(), r in 0usize..12) {
            let spec = three_node_spec();
            let len = cyc.len();
            let mut nodes = cyc.clone();
            nodes.push(cyc[0]);
            let v = eval_schedule(&spec, &nodes, &times, 0, len).unwrap();
            let r = r % len;
            cyc.rotate_left(r);
            let mut t2 = times.clone();
            t2.rotate_left(r);
            let mut n2 = cyc.clone();
            n2.push(cyc[0]);
            let w = eval_schedule(&spec, &n2, &t2, 0, len).unwrap();
            prop_assert!((v - w).abs() <= 1e-12 * (1.0 + v.abs()));
        }

        #[test]
        fn incremental_matches_naive((mut walk, times) in random_cycle()) {
            let spec = three_node_spec();
            let b = walk.len() - 1;
            walk[0] = walk[b];
            let mut inc = IncrementalEval::new(&spec, b);
            let mut a = b;
            for a_new in (0..b).rev().filter(|&i| walk[i] == walk[b]) {
                let got = eval_schedule_incremental(&spec, &walk, &times, a_new, a, b, &mut inc).unwrap();
                let want = eval_schedule(&spec, &walk, &times, a_new, b).unwrap();
                prop_assert!((got - want).abs() <= 1e-12 * (1.0 + want.abs()));
                a = a_new;
            }
        }

        #[test]
        fn window_scan_matches_naive_search(
            walk in prop::collection::vec(0usize..6, 2..160),
            times in prop::collection::vec(1u64..6, 160),
            ell in 1usize..40,
        ) {
            let spec = three_node_spec();
            let base: Vec<usize> = walk.iter().map(|&v| v / 2).collect();
            let tau = &times[..walk.len() - 1];
            let mut want: Option<f64> = None;
            for b in 1..walk.len() {
                for a in (b.saturating_sub(ell)..b).rev().filter(|&a| walk[a] == walk[b]) {
                    let v = eval_schedule(&spec, &base, tau, a, b).unwrap();
                    if want.map_or(true, |w| v > w) {
                        want = Some(v);
                    }
                }
            }
            let got = best_window(&spec, 6, &walk, &base, tau, ell);
            prop_assert_eq!(got.is_some(), want.is_some());
            if let (Some((a, b, v)), Some(w)) = (got, want) {
                prop_assert!((v - w).abs() <= 1e-12 * (1.0 + w.abs()));
                prop_assert_eq!(walk[a], walk[b]);
                prop_assert!(b - a <= ell);
                let direct = eval_schedule(&spec, &base, tau, a, b).unwrap();
                prop_assert!((direct - v).abs() <= 1e-12 * (1.0 + v.abs()));
            }
        }
    }
}
